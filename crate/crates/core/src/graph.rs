//! Metric graphs: the concrete realization of the metric space the
//! equation lives on.
//!
//! A graph with positive edge lengths carries the shortest-path metric.
//! Points are addressed as (edge, arc-length offset); vertices get a
//! canonical representative so point identity is decidable. A
//! [`SpaceLattice`] subdivides every edge into cells of width at most
//! `dx` and is the spatial grid used by the solver and the verifier.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// Coordinate tolerance for point identity and offset snapping.
pub const GEOM_TOL: f64 = 1e-9;

/// Cap on branch endpoints explored by a single [`MetricGraph::walk`] call.
/// Walks are short (a few cells), so this only triggers on degenerate
/// graphs with clusters of near-zero edges.
const WALK_BUDGET: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

/// Lattice node index, dense in `0..lattice.num_nodes()`.
pub type NodeId = usize;

#[derive(Debug, Clone)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub length: f64,
}

/// A point of the graph: arc-length `offset` from endpoint `u` of `edge`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphPoint {
    pub edge: EdgeId,
    pub offset: f64,
}

impl GraphPoint {
    pub fn new(edge: EdgeId, offset: f64) -> Self {
        GraphPoint { edge, offset }
    }
}

/// A signed direction of travel along one edge: `sign > 0` increases the
/// offset (towards endpoint `v`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Direction {
    pub edge: EdgeId,
    pub sign: i8,
}

/// One monotone run along a single edge, from offset `from` to `to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPiece {
    pub edge: EdgeId,
    pub from: f64,
    pub to: f64,
}

impl PathPiece {
    pub fn length(&self) -> f64 {
        (self.to - self.from).abs()
    }
}

/// A continuous path on the graph, parametrized by arc length.
///
/// `pieces` may be empty (the trivial path staying at `start`).
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPath {
    pub start: GraphPoint,
    pub pieces: Vec<PathPiece>,
}

impl GraphPath {
    pub fn trivial(start: GraphPoint) -> Self {
        GraphPath {
            start,
            pieces: Vec::new(),
        }
    }

    pub fn length(&self) -> f64 {
        self.pieces.iter().map(PathPiece::length).sum()
    }

    pub fn end(&self) -> GraphPoint {
        match self.pieces.last() {
            Some(p) => GraphPoint::new(p.edge, p.to),
            None => self.start,
        }
    }

    /// Position at arc length `s` from the start; clamps to the endpoints.
    pub fn point_at(&self, s: f64) -> GraphPoint {
        if s <= 0.0 {
            return self.start;
        }
        let mut rem = s;
        for piece in &self.pieces {
            let len = piece.length();
            if rem <= len {
                let dir = if piece.to >= piece.from { 1.0 } else { -1.0 };
                return GraphPoint::new(piece.edge, piece.from + dir * rem);
            }
            rem -= len;
        }
        self.end()
    }
}

/// A connected graph with positive edge lengths and the geodesic metric.
#[derive(Debug)]
pub struct MetricGraph {
    vertex_ids: Vec<usize>,
    edges: Vec<Edge>,
    /// Incident edges per dense vertex index, ascending by edge id.
    incident: Vec<Vec<EdgeId>>,
    /// All-pairs shortest vertex-to-vertex distances.
    vertex_dist: Vec<Vec<f64>>,
}

impl MetricGraph {
    /// Builds the graph, validating edge lengths, endpoint references and
    /// connectivity. Vertex ids keep their given order; edges keep theirs.
    pub fn new(vertex_ids: Vec<usize>, raw_edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if vertex_ids.is_empty() {
            return Err(Error::invalid_input("graph needs at least one vertex"));
        }
        if raw_edges.is_empty() {
            return Err(Error::invalid_input("graph needs at least one edge"));
        }
        let mut seen = std::collections::HashSet::new();
        for &id in &vertex_ids {
            if !seen.insert(id) {
                return Err(Error::invalid_input(format!("duplicate vertex id {id}")));
            }
        }
        let index_of = |id: usize| -> Result<VertexId> {
            vertex_ids
                .iter()
                .position(|&w| w == id)
                .map(VertexId)
                .ok_or_else(|| Error::invalid_input(format!("edge references unknown vertex {id}")))
        };
        let mut edges = Vec::with_capacity(raw_edges.len());
        for (i, &(a, b, len)) in raw_edges.iter().enumerate() {
            if !(len > 0.0) || !len.is_finite() {
                return Err(Error::invalid_input(format!(
                    "edge {i} has non-positive length {len}"
                )));
            }
            edges.push(Edge {
                u: index_of(a)?,
                v: index_of(b)?,
                length: len,
            });
        }
        let n = vertex_ids.len();
        let mut incident = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            incident[e.u.0].push(EdgeId(i));
            if e.v != e.u {
                incident[e.v.0].push(EdgeId(i));
            }
        }
        for list in &mut incident {
            list.sort();
        }

        // Connectivity check.
        let mut reached = vec![false; n];
        let mut stack = vec![0usize];
        reached[0] = true;
        while let Some(v) = stack.pop() {
            for &e in &incident[v] {
                for w in [edges[e.0].u.0, edges[e.0].v.0] {
                    if !reached[w] {
                        reached[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        if let Some(missing) = reached.iter().position(|r| !r) {
            return Err(Error::invalid_input(format!(
                "graph is disconnected: vertex {} unreachable",
                vertex_ids[missing]
            )));
        }

        let vertex_dist = all_pairs_shortest(n, &edges, &incident);
        Ok(MetricGraph {
            vertex_ids,
            edges,
            incident,
            vertex_dist,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_ids(&self) -> &[usize] {
        &self.vertex_ids
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn incident_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.incident[v.0]
    }

    /// Dense index of an externally named vertex.
    pub fn vertex_by_id(&self, id: usize) -> Result<VertexId> {
        self.vertex_ids
            .iter()
            .position(|&w| w == id)
            .map(VertexId)
            .ok_or_else(|| Error::invalid_input(format!("unknown vertex id {id}")))
    }

    fn check_point(&self, p: GraphPoint) -> Result<()> {
        let e = self
            .edges
            .get(p.edge.0)
            .ok_or_else(|| Error::invalid_input(format!("unknown edge id {}", p.edge.0)))?;
        if p.offset < -GEOM_TOL || p.offset > e.length + GEOM_TOL || !p.offset.is_finite() {
            return Err(Error::invalid_input(format!(
                "offset {} outside [0, {}] on edge {}",
                p.offset, e.length, p.edge.0
            )));
        }
        Ok(())
    }

    /// The vertex a point coincides with, if any.
    pub fn vertex_at(&self, p: GraphPoint) -> Option<VertexId> {
        let e = &self.edges[p.edge.0];
        if p.offset.abs() <= GEOM_TOL {
            Some(e.u)
        } else if (e.length - p.offset).abs() <= GEOM_TOL {
            Some(e.v)
        } else {
            None
        }
    }

    /// Canonical point for a vertex: offset 0 or `length` on its
    /// lowest-id incident edge.
    pub fn vertex_point(&self, v: VertexId) -> GraphPoint {
        let e = self.incident[v.0][0];
        if self.edges[e.0].u == v {
            GraphPoint::new(e, 0.0)
        } else {
            GraphPoint::new(e, self.edges[e.0].length)
        }
    }

    /// Canonical representative: vertices are snapped to their designated
    /// incident edge, interior points are returned unchanged.
    pub fn canonical(&self, p: GraphPoint) -> GraphPoint {
        match self.vertex_at(p) {
            Some(v) => self.vertex_point(v),
            None => p,
        }
    }

    /// Point identity in the metric: true iff the geodesic distance is
    /// below the coordinate tolerance.
    pub fn same_location(&self, a: GraphPoint, b: GraphPoint) -> bool {
        let (ca, cb) = (self.canonical(a), self.canonical(b));
        if ca.edge == cb.edge && (ca.offset - cb.offset).abs() <= GEOM_TOL {
            return true;
        }
        self.distance(a, b).map(|d| d <= GEOM_TOL).unwrap_or(false)
    }

    /// Geodesic (shortest-path) distance between two points.
    pub fn distance(&self, a: GraphPoint, b: GraphPoint) -> Result<f64> {
        self.check_point(a)?;
        self.check_point(b)?;
        let ea = &self.edges[a.edge.0];
        let eb = &self.edges[b.edge.0];
        let mut best = if a.edge == b.edge {
            (a.offset - b.offset).abs()
        } else {
            f64::INFINITY
        };
        // Through-vertex routes: distance to each endpoint of the hosting
        // edge, combined with the vertex-to-vertex table. This also covers
        // self-loops and parallel edges.
        let a_ends = [(ea.u, a.offset), (ea.v, ea.length - a.offset)];
        let b_ends = [(eb.u, b.offset), (eb.v, eb.length - b.offset)];
        for &(va, da) in &a_ends {
            for &(vb, db) in &b_ends {
                let through = da + self.vertex_dist[va.0][vb.0] + db;
                if through < best {
                    best = through;
                }
            }
        }
        Ok(best)
    }

    /// Directions of travel available from a point, in deterministic order
    /// (ascending edge id; `+1` before `-1` on the same edge).
    pub fn directions(&self, p: GraphPoint) -> Vec<Direction> {
        match self.vertex_at(p) {
            Some(v) => {
                let mut dirs = Vec::new();
                for &e in &self.incident[v.0] {
                    if self.edges[e.0].u == v {
                        dirs.push(Direction { edge: e, sign: 1 });
                    }
                    if self.edges[e.0].v == v {
                        dirs.push(Direction { edge: e, sign: -1 });
                    }
                }
                dirs
            }
            None => vec![
                Direction {
                    edge: p.edge,
                    sign: 1,
                },
                Direction {
                    edge: p.edge,
                    sign: -1,
                },
            ],
        }
    }

    fn direction_start(&self, from: GraphPoint, dir: Direction) -> GraphPoint {
        if dir.edge == from.edge && self.vertex_at(from).is_none() {
            return from;
        }
        // `from` is a vertex; enter `dir.edge` from the matching end.
        match self.vertex_at(from) {
            Some(v) => {
                let e = &self.edges[dir.edge.0];
                if dir.sign > 0 {
                    debug_assert_eq!(e.u, v);
                    GraphPoint::new(dir.edge, 0.0)
                } else {
                    debug_assert_eq!(e.v, v);
                    GraphPoint::new(dir.edge, e.length)
                }
            }
            None => from,
        }
    }

    /// Enumerates every point reachable by traveling exactly `dist` from
    /// `from`, branching into each incident edge at every junction passed
    /// (including the reverse edge, so dead ends bounce back). `visit`
    /// receives the endpoint and the traversed path pieces. Enumeration
    /// order is deterministic: ascending edge id, `+1` before `-1`.
    pub fn walk(&self, from: GraphPoint, dist: f64, visit: &mut dyn FnMut(GraphPoint, &[PathPiece])) {
        if dist <= GEOM_TOL {
            visit(from, &[]);
            return;
        }
        let mut pieces = Vec::with_capacity(8);
        let mut budget = WALK_BUDGET;
        match self.vertex_at(from) {
            Some(v) => self.branch_from_vertex(&mut pieces, v, dist, visit, &mut budget),
            None => {
                for sign in [1i8, -1] {
                    self.walk_branch(
                        &mut pieces,
                        from,
                        Direction {
                            edge: from.edge,
                            sign,
                        },
                        dist,
                        visit,
                        &mut budget,
                    );
                }
            }
        }
    }

    fn branch_from_vertex(
        &self,
        pieces: &mut Vec<PathPiece>,
        v: VertexId,
        remaining: f64,
        visit: &mut dyn FnMut(GraphPoint, &[PathPiece]),
        budget: &mut usize,
    ) {
        for &e in &self.incident[v.0] {
            let edge = &self.edges[e.0];
            if edge.u == v {
                self.walk_branch(
                    pieces,
                    GraphPoint::new(e, 0.0),
                    Direction { edge: e, sign: 1 },
                    remaining,
                    visit,
                    budget,
                );
            }
            if edge.v == v {
                self.walk_branch(
                    pieces,
                    GraphPoint::new(e, edge.length),
                    Direction { edge: e, sign: -1 },
                    remaining,
                    visit,
                    budget,
                );
            }
        }
    }

    fn walk_branch(
        &self,
        pieces: &mut Vec<PathPiece>,
        at: GraphPoint,
        dir: Direction,
        remaining: f64,
        visit: &mut dyn FnMut(GraphPoint, &[PathPiece]),
        budget: &mut usize,
    ) {
        if *budget == 0 {
            return;
        }
        let e = &self.edges[dir.edge.0];
        let avail = if dir.sign > 0 {
            e.length - at.offset
        } else {
            at.offset
        };
        let step = remaining.min(avail);
        let to = at.offset + f64::from(dir.sign) * step;
        pieces.push(PathPiece {
            edge: dir.edge,
            from: at.offset,
            to,
        });
        let rem = remaining - step;
        if rem <= GEOM_TOL {
            *budget -= 1;
            visit(GraphPoint::new(dir.edge, to), pieces);
        } else {
            let vertex = if dir.sign > 0 { e.v } else { e.u };
            self.branch_from_vertex(pieces, vertex, rem, visit, budget);
        }
        pieces.pop();
    }

    /// All walk endpoints with their materialized paths.
    pub fn walk_paths(&self, from: GraphPoint, dist: f64) -> Vec<(GraphPoint, GraphPath)> {
        let mut out = Vec::new();
        self.walk(from, dist, &mut |end, pieces| {
            out.push((
                end,
                GraphPath {
                    start: from,
                    pieces: pieces.to_vec(),
                },
            ));
        });
        out
    }

    /// One random-walk path of length `dist` from `from`: a uniformly
    /// chosen direction at the start and at every junction reached.
    pub fn walk_random<R: Rng>(&self, from: GraphPoint, dist: f64, rng: &mut R) -> GraphPath {
        let mut path = GraphPath::trivial(from);
        if dist <= GEOM_TOL {
            return path;
        }
        let dirs = self.directions(from);
        let mut dir = dirs[rng.gen_range(0..dirs.len())];
        let mut at = self.direction_start(from, dir);
        let mut remaining = dist;
        loop {
            let e = &self.edges[dir.edge.0];
            let avail = if dir.sign > 0 {
                e.length - at.offset
            } else {
                at.offset
            };
            let step = remaining.min(avail);
            let to = at.offset + f64::from(dir.sign) * step;
            path.pieces.push(PathPiece {
                edge: dir.edge,
                from: at.offset,
                to,
            });
            remaining -= step;
            if remaining <= GEOM_TOL {
                return path;
            }
            let vertex = if dir.sign > 0 { e.v } else { e.u };
            let dirs = self.directions(self.vertex_point(vertex));
            dir = dirs[rng.gen_range(0..dirs.len())];
            at = self.direction_start(self.vertex_point(vertex), dir);
        }
    }
}

fn all_pairs_shortest(n: usize, edges: &[Edge], incident: &[Vec<EdgeId>]) -> Vec<Vec<f64>> {
    let mut table = Vec::with_capacity(n);
    for src in 0..n {
        let mut dist = vec![f64::INFINITY; n];
        dist[src] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((OrdF64(0.0), src)));
        while let Some(Reverse((OrdF64(d), v))) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &e in &incident[v] {
                let edge = &edges[e.0];
                let w = if edge.u.0 == v { edge.v.0 } else { edge.u.0 };
                let nd = d + edge.length;
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(Reverse((OrdF64(nd), w)));
                }
            }
        }
        table.push(dist);
    }
    table
}

/// Total-order wrapper so finite distances can live in a binary heap.
#[derive(PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Per-edge chain of lattice nodes, endpoints first and last.
#[derive(Debug, Clone)]
pub struct EdgeChain {
    pub nodes: Vec<NodeId>,
    pub spacing: f64,
}

/// Discretization of the graph: every edge subdivided into
/// `ceil(length/dx)` equal cells, vertices deduplicated, nodes ordered by
/// (edge id, offset).
#[derive(Debug)]
pub struct SpaceLattice {
    graph: Arc<MetricGraph>,
    dx: f64,
    nodes: Vec<GraphPoint>,
    chains: Vec<EdgeChain>,
    vertex_node: Vec<NodeId>,
    adjacency: Vec<Vec<(NodeId, f64)>>,
}

impl SpaceLattice {
    pub fn build(graph: Arc<MetricGraph>, dx: f64) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::invalid_input(format!("dx must be positive, got {dx}")));
        }
        // Candidate points: canonical vertex points plus interior
        // subdivision points, keyed for deterministic ordering.
        #[derive(PartialEq)]
        enum Kind {
            Vertex(VertexId),
            Interior,
        }
        let mut cands: Vec<(GraphPoint, Kind)> = (0..graph.num_vertices())
            .map(|v| (graph.vertex_point(VertexId(v)), Kind::Vertex(VertexId(v))))
            .collect();
        let mut cells_per_edge = Vec::with_capacity(graph.num_edges());
        for (i, e) in graph.edges().iter().enumerate() {
            let cells = ((e.length / dx) - 1e-12).ceil().max(1.0) as usize;
            cells_per_edge.push(cells);
            for k in 1..cells {
                let offset = e.length * (k as f64) / (cells as f64);
                cands.push((GraphPoint::new(EdgeId(i), offset), Kind::Interior));
            }
        }
        cands.sort_by(|a, b| {
            (a.0.edge, OrdF64(a.0.offset))
                .partial_cmp(&(b.0.edge, OrdF64(b.0.offset)))
                .unwrap()
        });

        let nodes: Vec<GraphPoint> = cands.iter().map(|(p, _)| *p).collect();
        let mut vertex_node = vec![usize::MAX; graph.num_vertices()];
        for (id, (_, kind)) in cands.iter().enumerate() {
            if let Kind::Vertex(v) = kind {
                vertex_node[v.0] = id;
            }
        }

        // Interior nodes of each edge occupy a contiguous run in the
        // sorted order; locate the runs and stitch in the vertex nodes.
        let mut chains = Vec::with_capacity(graph.num_edges());
        for (i, e) in graph.edges().iter().enumerate() {
            let cells = cells_per_edge[i];
            let spacing = e.length / cells as f64;
            let mut chain = Vec::with_capacity(cells + 1);
            chain.push(vertex_node[e.u.0]);
            for k in 1..cells {
                let offset = e.length * (k as f64) / (cells as f64);
                let id = nodes
                    .binary_search_by(|p| {
                        (p.edge, OrdF64(p.offset))
                            .partial_cmp(&(EdgeId(i), OrdF64(offset)))
                            .unwrap()
                    })
                    .expect("interior node present");
                chain.push(id);
            }
            chain.push(vertex_node[e.v.0]);
            chains.push(EdgeChain {
                nodes: chain,
                spacing,
            });
        }

        let mut adjacency = vec![Vec::new(); nodes.len()];
        for chain in &chains {
            for w in chain.nodes.windows(2) {
                adjacency[w[0]].push((w[1], chain.spacing));
                adjacency[w[1]].push((w[0], chain.spacing));
            }
        }

        Ok(SpaceLattice {
            graph,
            dx,
            nodes,
            chains,
            vertex_node,
            adjacency,
        })
    }

    pub fn graph(&self) -> &Arc<MetricGraph> {
        &self.graph
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[GraphPoint] {
        &self.nodes
    }

    pub fn node_point(&self, id: NodeId) -> GraphPoint {
        self.nodes[id]
    }

    pub fn chains(&self) -> &[EdgeChain] {
        &self.chains
    }

    pub fn vertex_node(&self, v: VertexId) -> NodeId {
        self.vertex_node[v.0]
    }

    pub fn adjacency(&self, id: NodeId) -> &[(NodeId, f64)] {
        &self.adjacency[id]
    }

    /// The lattice node a point coincides with, if any.
    pub fn node_at(&self, p: GraphPoint) -> Option<NodeId> {
        if let Some(v) = self.graph.vertex_at(p) {
            return Some(self.vertex_node[v.0]);
        }
        let chain = &self.chains[p.edge.0];
        let k = (p.offset / chain.spacing).round() as usize;
        if k < chain.nodes.len() && (p.offset - k as f64 * chain.spacing).abs() <= GEOM_TOL {
            Some(chain.nodes[k])
        } else {
            None
        }
    }

    /// Bracketing nodes and interpolation weight for a point on an edge:
    /// returns `(lo, hi, frac)` with the convention
    /// `value = (1 - frac) * layer[lo] + frac * layer[hi]`.
    pub fn locate(&self, p: GraphPoint) -> (NodeId, NodeId, f64) {
        let p = self.graph.canonical(p);
        if let Some(v) = self.graph.vertex_at(p) {
            let id = self.vertex_node[v.0];
            return (id, id, 0.0);
        }
        let chain = &self.chains[p.edge.0];
        let cells = chain.nodes.len() - 1;
        let mut i = (p.offset / chain.spacing).floor() as usize;
        if i >= cells {
            i = cells - 1;
        }
        let frac = ((p.offset - i as f64 * chain.spacing) / chain.spacing).clamp(0.0, 1.0);
        (chain.nodes[i], chain.nodes[i + 1], frac)
    }

    /// Linear interpolation of per-node values along the hosting edge.
    pub fn interpolate(&self, layer: &[f64], p: GraphPoint) -> f64 {
        let (lo, hi, frac) = self.locate(p);
        if lo == hi || frac == 0.0 {
            layer[lo]
        } else {
            (1.0 - frac) * layer[lo] + frac * layer[hi]
        }
    }
}
