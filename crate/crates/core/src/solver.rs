//! Semi-Lagrangian dynamic programming for the value function
//! U(x,t) = inf over admissible curves from x of ∫₀ᵗ L[ξ] dr + u₀(ξ(t)).
//!
//! The update realizes the dynamic programming principle on the lattice:
//! U[x][k+1] = min over discrete speeds v and branch directions of
//! dt·L(x,v) + Ũ(y, k), where y sits at graph distance v·dt from x and Ũ
//! interpolates linearly along edges (never across a vertex without
//! passing through its node). On top of the speed grid, each update also
//! tries node-exact multi-step moves — ride to a nearby lattice node at
//! the exact speed d/(m·dt) and continue from layer k+1-m — which reads
//! node values directly instead of interpolating and keeps the scheme
//! sharp where the value function carries strong curvature. The scheme is
//! monotone, and the chosen argmin records make near-optimal trajectories
//! extractable.

use std::sync::Arc;

use rayon::prelude::*;

use crate::curves::{AdmissibleCurve, Segment};
use crate::error::{Error, Result};
use crate::graph::{GraphPath, GraphPoint, MetricGraph, NodeId, SpaceLattice, VertexId, GEOM_TOL};
use crate::hamiltonian::Lagrangian;

/// Closed forms for initial data, kept so refinement studies can resample
/// exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialKind {
    Constant(f64),
    /// u₀(x) = d(x, vertex); 1-Lipschitz.
    DistanceToVertex(VertexId),
    /// u₀(x) = height · max(0, 1 - d(x, center)/width).
    Bump {
        center: VertexId,
        height: f64,
        width: f64,
    },
    /// Per-node table with no closed form.
    Table,
}

/// Bounded uniformly continuous initial datum sampled on the lattice.
#[derive(Debug, Clone)]
pub struct InitialDatum {
    kind: InitialKind,
    values: Vec<f64>,
}

impl InitialDatum {
    pub fn sample(kind: InitialKind, lattice: &SpaceLattice) -> Result<Self> {
        if kind == InitialKind::Table {
            return Err(Error::invalid_input(
                "table-backed initial data must use from_values",
            ));
        }
        let g = lattice.graph();
        let values = (0..lattice.num_nodes())
            .map(|i| eval_closed_form(kind, g, lattice.node_point(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(InitialDatum { kind, values })
    }

    pub fn from_values(lattice: &SpaceLattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.num_nodes() {
            return Err(Error::invalid_input(format!(
                "initial datum has {} values for {} nodes",
                values.len(),
                lattice.num_nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("initial datum must be finite"));
        }
        Ok(InitialDatum {
            kind: InitialKind::Table,
            values,
        })
    }

    pub fn kind(&self) -> InitialKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// u₀ at an arbitrary point: exact for closed forms, interpolated for
    /// tables.
    pub fn eval(&self, lattice: &SpaceLattice, x: GraphPoint) -> f64 {
        match self.kind {
            InitialKind::Table => lattice.interpolate(&self.values, x),
            kind => eval_closed_form(kind, lattice.graph(), x).expect("valid point"),
        }
    }

    /// Resamples a closed form onto a refined lattice.
    pub fn resample(&self, lattice: &SpaceLattice) -> Result<InitialDatum> {
        if self.kind == InitialKind::Table {
            return Err(Error::invalid_input(
                "table-backed initial data cannot be resampled in a refinement study",
            ));
        }
        InitialDatum::sample(self.kind, lattice)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Empirical Lipschitz constant over adjacent lattice nodes.
    pub fn lipschitz_estimate(&self, lattice: &SpaceLattice) -> f64 {
        let mut lip = 0.0f64;
        for i in 0..lattice.num_nodes() {
            for &(j, d) in lattice.adjacency(i) {
                lip = lip.max((self.values[i] - self.values[j]).abs() / d.max(1e-300));
            }
        }
        lip
    }
}

fn eval_closed_form(kind: InitialKind, g: &MetricGraph, x: GraphPoint) -> Result<f64> {
    match kind {
        InitialKind::Constant(c) => Ok(c),
        InitialKind::DistanceToVertex(v) => g.distance(x, g.vertex_point(v)),
        InitialKind::Bump {
            center,
            height,
            width,
        } => {
            let d = g.distance(x, g.vertex_point(center))?;
            Ok(height * (1.0 - d / width).max(0.0))
        }
        InitialKind::Table => Err(Error::internal("table datum has no closed form")),
    }
}

/// Speed grid policies for the minimization over v.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VPolicy {
    Geometric,
    Uniform,
}

/// Number of interpolation cells a single move may span.
pub const MAX_MOVE_CELLS: f64 = 4.0;

/// Longest node-exact ride, in time steps.
const MAX_RIDE_STEPS: usize = 64;

/// Default cap on the speed grid: the uniform velocity bound when finite,
/// otherwise the reach of `MAX_MOVE_CELLS` cells per step.
pub fn default_v_max(lag: &Lagrangian, dx: f64, dt: f64) -> f64 {
    lag.global_v_limit().min(MAX_MOVE_CELLS * dx / dt)
}

/// Default speed count, refined with the mesh so the control error keeps
/// pace with the interpolation error.
pub fn default_v_count(dx: f64) -> usize {
    (8.0 / dx.sqrt()).ceil().max(16.0) as usize
}

/// {0} ∪ a grid of `count` positive speeds up to `v_max`.
pub fn speed_grid(policy: VPolicy, v_max: f64, count: usize) -> Vec<f64> {
    let mut grid = vec![0.0];
    if !(v_max > 0.0) || count == 0 {
        return grid;
    }
    match policy {
        VPolicy::Geometric => {
            let v_min = v_max / 256.0;
            let ratio = (v_max / v_min).powf(1.0 / (count.saturating_sub(1)).max(1) as f64);
            let mut v = v_min;
            for _ in 0..count - 1 {
                grid.push(v);
                v *= ratio;
            }
            grid.push(v_max);
        }
        VPolicy::Uniform => {
            for i in 1..=count {
                grid.push(v_max * i as f64 / count as f64);
            }
        }
    }
    grid
}

/// The argmin of one update: chosen speed, landing point, and how many
/// time steps the move spans (1 for ordinary moves, m for node-exact
/// multi-step rides).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveRecord {
    pub speed: f64,
    pub target: GraphPoint,
    pub steps: usize,
}

/// Tabulated value function U on the space×time lattice, with the argmin
/// records needed for trajectory extraction.
#[derive(Debug)]
pub struct ValueGrid {
    lattice: Arc<SpaceLattice>,
    lag: Arc<Lagrangian>,
    dt: f64,
    v_grid: Vec<f64>,
    layers: Vec<Vec<f64>>,
    records: Vec<Vec<MoveRecord>>,
}

impl ValueGrid {
    pub fn lattice(&self) -> &Arc<SpaceLattice> {
        &self.lattice
    }

    pub fn lagrangian(&self) -> &Arc<Lagrangian> {
        &self.lag
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn num_steps(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn t_horizon(&self) -> f64 {
        self.num_steps() as f64 * self.dt
    }

    pub fn v_grid(&self) -> &[f64] {
        &self.v_grid
    }

    pub fn layer(&self, k: usize) -> &[f64] {
        &self.layers[k]
    }

    pub fn value(&self, node: NodeId, k: usize) -> f64 {
        self.layers[k][node]
    }

    /// Lowers or raises a single entry; used by the corruption-injection
    /// fixtures to exercise the verifier.
    pub fn set_value(&mut self, node: NodeId, k: usize, v: f64) {
        self.layers[k][node] = v;
    }

    /// Space-interpolated value at a grid time index.
    pub fn value_at_index(&self, x: GraphPoint, k: usize) -> f64 {
        self.lattice.interpolate(&self.layers[k], x)
    }

    /// Space- and time-interpolated value; t clamps to [0, T].
    pub fn value_at(&self, x: GraphPoint, t: f64) -> f64 {
        let steps = self.num_steps();
        let s = (t / self.dt).clamp(0.0, steps as f64);
        let k = s.floor() as usize;
        if k >= steps {
            return self.value_at_index(x, steps);
        }
        let w = s - k as f64;
        if w == 0.0 {
            self.value_at_index(x, k)
        } else {
            (1.0 - w) * self.value_at_index(x, k)
                + w * self.value_at_index(x, k + 1)
        }
    }

    /// Worst violation of the two-sided a-priori bounds
    /// floor·t + inf u₀ ≤ U(x,t) ≤ t·L(x,0) + u₀(x); nonpositive when the
    /// bounds hold everywhere.
    pub fn apriori_worst_violation(&self, u0: &InitialDatum) -> f64 {
        let inf_u0 = u0.min();
        let mut worst = f64::NEG_INFINITY;
        for (k, layer) in self.layers.iter().enumerate() {
            let t = k as f64 * self.dt;
            for (i, &u) in layer.iter().enumerate() {
                let x = self.lattice.node_point(i);
                let lower = self.lag.floor() * t + inf_u0;
                let upper = t * self.lag.eval(x, 0.0) + u0.values()[i];
                worst = worst.max(lower - u).max(u - upper);
            }
        }
        worst
    }

    /// Recomputes layer `k` from layer `k-1`; the scheme is deterministic,
    /// so the result is bit-identical to the stored layer.
    pub fn recompute_layer(&self, k: usize) -> Result<Vec<f64>> {
        if k == 0 || k > self.num_steps() {
            return Err(Error::invalid_input(format!(
                "layer {k} out of range 1..={}",
                self.num_steps()
            )));
        }
        let scheme = Scheme::new(&self.lattice, &self.lag, self.dt, &self.v_grid);
        Ok(scheme.step(&self.layers[..k])?.0)
    }

    /// Follows the stored argmin records backward in time from (x, t),
    /// producing the near-optimal curve that witnesses superoptimality.
    /// Intermediate landing points fall off the lattice; from there the
    /// same one-step minimization is reapplied directly, which is the
    /// dynamic-programming construction the records came from.
    pub fn extract_trajectory(&self, x: GraphPoint, t: f64) -> Result<AdmissibleCurve> {
        let k = (t / self.dt).round() as usize;
        if ((t - k as f64 * self.dt).abs() > 1e-9 * (1.0 + t)) || k > self.num_steps() {
            return Err(Error::invalid_input(format!(
                "t = {t} is not on the time grid (dt = {}, T = {})",
                self.dt,
                self.t_horizon()
            )));
        }
        let scheme = Scheme::new(&self.lattice, &self.lag, self.dt, &self.v_grid);
        let g = self.lattice.graph().clone();
        let mut segments = Vec::with_capacity(k);
        let mut cur = x;
        let mut j = k;
        while j > 0 {
            let (rec, path) = match self.lattice.node_at(cur) {
                Some(node) => {
                    let rec = self
                        .records
                        .get(j - 1)
                        .and_then(|r| r.get(node))
                        .copied()
                        .ok_or_else(|| Error::internal("missing argmin record"))?;
                    let path = self.record_path(cur, rec)?;
                    (rec, path)
                }
                None => {
                    let found = scheme
                        .best_move(cur, None, &self.layers[..j], true)
                        .ok_or_else(|| Error::internal("no finite move during extraction"))?;
                    let path = found.path.unwrap_or_else(|| GraphPath::trivial(cur));
                    (found.record, path)
                }
            };
            if rec.steps == 0 || rec.steps > j {
                return Err(Error::internal("argmin record spans past the initial time"));
            }
            let target = path.end();
            segments.push(Segment {
                duration: rec.steps as f64 * self.dt,
                speed: rec.speed,
                path,
            });
            cur = target;
            j -= rec.steps;
        }
        AdmissibleCurve::new(&g, x, segments)
    }

    /// Rebuilds the traversed path of a stored argmin record: the first
    /// walk branch landing on the recorded target, matching the
    /// enumeration order the record was chosen under.
    fn record_path(&self, from: GraphPoint, rec: MoveRecord) -> Result<GraphPath> {
        if rec.speed == 0.0 {
            return Ok(GraphPath::trivial(from));
        }
        let g = self.lattice.graph();
        let mut path: Option<GraphPath> = None;
        g.walk(from, rec.speed * (rec.steps as f64 * self.dt), &mut |end, pieces| {
            if path.is_none() && g.same_location(end, rec.target) {
                path = Some(GraphPath {
                    start: from,
                    pieces: pieces.to_vec(),
                });
            }
        });
        path.ok_or_else(|| Error::internal("argmin record target is unreachable"))
    }
}

/// Lattice nodes within `radius` of node `i` along the chain graph, with
/// exact walk distances, ordered by (distance, node id).
fn ride_targets(lattice: &SpaceLattice, i: NodeId, radius: f64) -> Vec<(NodeId, f64)> {
    use std::cmp::Reverse;
    use std::collections::{BinaryHeap, HashMap};
    let mut dist: HashMap<NodeId, f64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(i, 0.0);
    heap.push(Reverse((TotalF64(0.0), i)));
    while let Some(Reverse((TotalF64(d), n))) = heap.pop() {
        if d > *dist.get(&n).unwrap_or(&f64::INFINITY) {
            continue;
        }
        for &(m, w) in lattice.adjacency(n) {
            let nd = d + w;
            if nd <= radius + 1e-12 && nd < *dist.get(&m).unwrap_or(&f64::INFINITY) {
                dist.insert(m, nd);
                heap.push(Reverse((TotalF64(nd), m)));
            }
        }
    }
    let mut out: Vec<(NodeId, f64)> = dist
        .into_iter()
        .filter(|&(n, d)| n != i && d > GEOM_TOL)
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    out
}

#[derive(PartialEq)]
struct TotalF64(f64);

impl Eq for TotalF64 {}

impl PartialOrd for TotalF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TotalF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct FoundMove {
    value: f64,
    record: MoveRecord,
    path: Option<GraphPath>,
}

/// One-step semi-Lagrangian update machinery shared by solve, layer
/// recomputation and trajectory extraction.
struct Scheme<'a> {
    lattice: &'a SpaceLattice,
    lag: &'a Lagrangian,
    dt: f64,
    v_grid: &'a [f64],
    /// dt·L(node, v) per node and speed index; +∞ marks excluded speeds.
    cost: Vec<Vec<f64>>,
    /// Ride targets per node: lattice nodes within the ride radius, with
    /// their exact walk distances, ascending.
    rides: Vec<Vec<(NodeId, f64)>>,
}

impl<'a> Scheme<'a> {
    fn new(lattice: &'a SpaceLattice, lag: &'a Lagrangian, dt: f64, v_grid: &'a [f64]) -> Self {
        let cost = (0..lattice.num_nodes())
            .map(|i| {
                let x = lattice.node_point(i);
                v_grid.iter().map(|&v| dt * lag.eval(x, v)).collect()
            })
            .collect();
        // The ride radius grows like sqrt(dx) in cell units, so the
        // speed quantization d/(m·dt) of the farthest rides refines
        // faster than the mesh. Rounding to a whole number of cells
        // keeps the effective radius consistent across refinement
        // levels.
        let dx = lattice.dx();
        let cells = (0.7 / dx.sqrt()).round().max(4.0);
        let radius = cells * dx * (1.0 + 1e-9);
        let rides = (0..lattice.num_nodes())
            .map(|i| ride_targets(lattice, i, radius))
            .collect();
        Scheme {
            lattice,
            lag,
            dt,
            v_grid,
            cost,
            rides,
        }
    }

    /// Minimizes over speeds and branch directions from `x` against the
    /// previous layer. Ties break to the lowest speed, then the first
    /// endpoint in walk order (ascending edge id). `want_path` additionally
    /// materializes the traversed path of the argmin.
    ///
    /// Besides the speed grid, every lattice node within reach is tried at
    /// the exact speed that lands on it. Those candidates read the layer
    /// value directly instead of interpolating, which keeps the scheme
    /// sharp where the value function has strong curvature.
    fn best_move(
        &self,
        x: GraphPoint,
        node: Option<NodeId>,
        history: &[Vec<f64>],
        want_path: bool,
    ) -> Option<FoundMove> {
        let g = self.lattice.graph();
        let layer = history.last().expect("nonempty history");
        let mut best: Option<FoundMove> = None;
        for (vi, &v) in self.v_grid.iter().enumerate() {
            let move_cost = match node {
                Some(i) => self.cost[i][vi],
                None => self.dt * self.lag.eval(x, v),
            };
            if !move_cost.is_finite() {
                continue;
            }
            if v == 0.0 {
                let val = move_cost + self.lattice.interpolate(layer, x);
                if best.as_ref().is_none_or(|b| val < b.value) {
                    best = Some(FoundMove {
                        value: val,
                        record: MoveRecord {
                            speed: v,
                            target: x,
                            steps: 1,
                        },
                        path: want_path.then(|| GraphPath::trivial(x)),
                    });
                }
            } else {
                g.walk(x, v * self.dt, &mut |end, pieces| {
                    let val = move_cost + self.lattice.interpolate(layer, end);
                    if best.as_ref().is_none_or(|b| val < b.value) {
                        best = Some(FoundMove {
                            value: val,
                            record: MoveRecord {
                                speed: v,
                                target: end,
                                steps: 1,
                            },
                            path: want_path.then(|| GraphPath {
                                start: x,
                                pieces: pieces.to_vec(),
                            }),
                        });
                    }
                });
            }
        }
        // Node-exact rides: reach a nearby node in m steps at the exact
        // speed d/(m·dt), continuing from the matching older layer. No
        // spatial interpolation is involved, so these candidates stay
        // sharp where the layer has strong curvature between nodes.
        if let Some(i) = node {
            let v_cap = self.v_grid.last().copied().unwrap_or(0.0);
            for &(j, d) in &self.rides[i] {
                let y = self.lattice.node_point(j);
                let m_lo = ((d / (v_cap * self.dt)) - 1e-9).ceil().max(1.0) as usize;
                for m in m_lo..=history.len().min(MAX_RIDE_STEPS) {
                    let h = m as f64 * self.dt;
                    let v = d / h;
                    // Trapezoidal pricing of the action along the ride.
                    let move_cost = 0.5 * h * (self.lag.eval(x, v) + self.lag.eval(y, v));
                    if !move_cost.is_finite() {
                        continue;
                    }
                    let val = move_cost + history[history.len() - m][j];
                    if best.as_ref().is_none_or(|b| val < b.value) {
                        best = Some(FoundMove {
                            value: val,
                            record: MoveRecord {
                                speed: v,
                                target: y,
                                steps: m,
                            },
                            path: want_path.then(|| self.ride_path(x, v * h, y)),
                        });
                    }
                }
            }
        }
        best
    }

    /// Path of a node-exact ride: the first walk branch of the right
    /// length ending on the target node.
    fn ride_path(&self, from: GraphPoint, dist: f64, target: GraphPoint) -> GraphPath {
        let g = self.lattice.graph();
        let mut path: Option<GraphPath> = None;
        g.walk(from, dist, &mut |end, pieces| {
            if path.is_none() && g.same_location(end, target) {
                path = Some(GraphPath {
                    start: from,
                    pieces: pieces.to_vec(),
                });
            }
        });
        path.unwrap_or_else(|| GraphPath::trivial(from))
    }

    /// Computes the next layer from the stored history; pure, so
    /// concurrent node updates and bit-exact reruns are safe.
    fn step(&self, history: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<MoveRecord>)> {
        let n = self.lattice.num_nodes();
        let results: Vec<Option<FoundMove>> = (0..n)
            .into_par_iter()
            .map(|i| self.best_move(self.lattice.node_point(i), Some(i), history, false))
            .collect();
        let mut values = Vec::with_capacity(n);
        let mut records = Vec::with_capacity(n);
        for (i, res) in results.into_iter().enumerate() {
            match res {
                Some(found) => {
                    values.push(found.value);
                    records.push(found.record);
                }
                None => {
                    return Err(Error::invalid_input(format!(
                        "node {i}: every candidate move has infinite cost; \
                         the speed grid misses the finite domain of L"
                    )));
                }
            }
        }
        Ok((values, records))
    }
}

/// Runs the dynamic programming iteration up to the horizon `t_horizon`
/// (rounded up to a whole number of steps).
pub fn solve(
    lattice: &Arc<SpaceLattice>,
    lag: &Arc<Lagrangian>,
    u0: &InitialDatum,
    t_horizon: f64,
    dt: f64,
    v_grid: Vec<f64>,
) -> Result<ValueGrid> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid_input(format!("dt must be positive, got {dt}")));
    }
    if !(t_horizon > 0.0) {
        return Err(Error::invalid_input(format!(
            "time horizon must be positive, got {t_horizon}"
        )));
    }
    if u0.values().len() != lattice.num_nodes() {
        return Err(Error::invalid_input(
            "initial datum sampled on a different lattice",
        ));
    }
    let mut v_grid = v_grid;
    v_grid.retain(|v| v.is_finite() && *v >= 0.0);
    v_grid.sort_by(f64::total_cmp);
    v_grid.dedup();
    if v_grid.first() != Some(&0.0) {
        return Err(Error::invalid_input("speed grid must contain 0"));
    }
    let steps = ((t_horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    let scheme = Scheme::new(lattice, lag, dt, &v_grid);
    let mut layers = vec![u0.values().to_vec()];
    let mut records = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (next, recs) = scheme.step(&layers)?;
        layers.push(next);
        records.push(recs);
    }
    Ok(ValueGrid {
        lattice: lattice.clone(),
        lag: lag.clone(),
        dt,
        v_grid,
        layers,
        records,
    })
}

/// Reference solutions available in closed form (up to dense 1-D
/// minimization); the independent route for convergence studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    /// Constant σ and f: U(x,t) = u₀(x) + f·t for constant u₀.
    Constant,
    /// H(x,p) = σp - f with constants: U = f·t + min{u₀(y) : d(x,y) ≤ σt}.
    EikonalBall,
    /// H(x,p) = σp²/2 - f with constants:
    /// U = f·t + min_y {d(x,y)²/(2σt) + u₀(y)}.
    HopfLaxQuadratic,
}

/// Dense sample of graph points used for oracle minimization.
pub fn dense_points(g: &MetricGraph, resolution: f64) -> Vec<GraphPoint> {
    let mut pts = Vec::new();
    for (i, e) in g.edges().iter().enumerate() {
        let n = ((e.length / resolution).ceil() as usize).max(1);
        for k in 0..=n {
            pts.push(GraphPoint::new(
                crate::graph::EdgeId(i),
                e.length * k as f64 / n as f64,
            ));
        }
    }
    pts
}

/// Evaluates the oracle at (x, t) by minimizing over the dense sample.
pub fn oracle_value(
    kind: OracleKind,
    g: &MetricGraph,
    lattice: &SpaceLattice,
    u0: &InitialDatum,
    sigma: f64,
    f: f64,
    x: GraphPoint,
    t: f64,
    dense: &[GraphPoint],
) -> Result<f64> {
    if t <= 0.0 {
        return Ok(u0.eval(lattice, x));
    }
    match kind {
        OracleKind::Constant => Ok(u0.eval(lattice, x) + f * t),
        OracleKind::EikonalBall => {
            let radius = sigma * t;
            let mut best = f64::INFINITY;
            for &y in dense {
                if g.distance(x, y)? <= radius + 1e-12 {
                    best = best.min(u0.eval(lattice, y));
                }
            }
            Ok(f * t + best)
        }
        OracleKind::HopfLaxQuadratic => {
            let mut best = f64::INFINITY;
            for &y in dense {
                let d = g.distance(x, y)?;
                best = best.min(d * d / (2.0 * sigma * t) + u0.eval(lattice, y));
            }
            Ok(f * t + best)
        }
    }
}

/// One row of a refinement study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub level: usize,
    pub dx: f64,
    pub dt: f64,
    pub max_error: f64,
    pub observed_order: Option<f64>,
}

/// Inputs for a refinement study; composite Hamiltonian with constant σ
/// and f, and a closed-form initial datum, so every level resamples
/// exactly.
pub struct RefineSetup {
    pub graph: Arc<MetricGraph>,
    pub h: crate::hamiltonian::HKind,
    pub sigma: f64,
    pub f: f64,
    pub u0: InitialKind,
    pub t_horizon: f64,
    pub dx: f64,
    pub dt: f64,
    pub policy: VPolicy,
    pub v_count: Option<usize>,
    pub oracle: OracleKind,
    pub p_max: f64,
    pub n_p: usize,
}

/// Solves at successive (dx, dt) halvings and tabulates max-norm errors
/// against the oracle at the final time.
pub fn refine_study(setup: &RefineSetup, levels: usize) -> Result<Vec<ConvergenceRow>> {
    if levels < 2 {
        return Err(Error::invalid_input("refinement study needs >= 2 levels"));
    }
    if setup.u0 == InitialKind::Table {
        return Err(Error::invalid_input(
            "refinement study needs a closed-form initial datum",
        ));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
    for level in 0..levels {
        let scale = 2f64.powi(level as i32);
        let (dx, dt) = (setup.dx / scale, setup.dt / scale);
        let lattice = Arc::new(SpaceLattice::build(setup.graph.clone(), dx)?);
        let ham = Arc::new(crate::hamiltonian::HamiltonianSpec::composite(
            lattice.clone(),
            crate::hamiltonian::NodeFn::Constant(setup.sigma),
            setup.h,
            crate::hamiltonian::NodeFn::Constant(setup.f),
        )?);
        let lag = Arc::new(Lagrangian::new(ham, setup.p_max, setup.n_p)?);
        let u0 = InitialDatum::sample(setup.u0, &lattice)?;
        let count = setup.v_count.unwrap_or_else(|| default_v_count(dx));
        let v_grid = speed_grid(setup.policy, default_v_max(&lag, dx, dt), count);
        let grid = solve(&lattice, &lag, &u0, setup.t_horizon, dt, v_grid)?;
        let dense = dense_points(&setup.graph, dx / 4.0);
        let t = grid.t_horizon();
        let mut max_error = 0.0f64;
        for i in 0..lattice.num_nodes() {
            let x = lattice.node_point(i);
            let want = oracle_value(
                setup.oracle,
                &setup.graph,
                &lattice,
                &u0,
                setup.sigma,
                setup.f,
                x,
                t,
                &dense,
            )?;
            max_error = max_error.max((grid.value(i, grid.num_steps()) - want).abs());
        }
        let observed_order = rows.last().map(|prev: &ConvergenceRow| {
            (prev.max_error.max(1e-300) / max_error.max(1e-300)).log2()
        });
        rows.push(ConvergenceRow {
            level,
            dx,
            dt,
            max_error,
            observed_order,
        });
    }
    Ok(rows)
}

/// Exhaustive minimization of the cost functional over a finite family of
/// piecewise constant-speed curves: `depth` equal-duration segments, each
/// choosing a speed from `speeds` and one of the first `dir_cap` branch
/// directions. An independent upper bound on the value function for small
/// instances.
pub fn brute_force_value(
    g: &MetricGraph,
    lattice: &SpaceLattice,
    lag: &Lagrangian,
    u0: &InitialDatum,
    x: GraphPoint,
    t: f64,
    depth: usize,
    speeds: &[f64],
    dir_cap: usize,
) -> Result<f64> {
    if g.num_edges() > 4 || depth > 4 || speeds.len() > 6 || dir_cap > 4 {
        return Err(Error::invalid_input(format!(
            "instance too large for exhaustive enumeration \
             (edges {} <= 4, depth {depth} <= 4, speeds {} <= 6, directions {dir_cap} <= 4)",
            g.num_edges(),
            speeds.len()
        )));
    }
    if depth == 0 || dir_cap == 0 || speeds.is_empty() || !(t > 0.0) {
        return Err(Error::invalid_input(
            "need depth >= 1, dir_cap >= 1, speeds nonempty and t > 0",
        ));
    }
    let duration = t / depth as f64;
    let mut best = f64::INFINITY;
    let mut segments: Vec<Segment> = Vec::with_capacity(depth);
    enumerate(
        g, lattice, lag, u0, x, t, duration, depth, speeds, dir_cap, &mut segments, &mut best,
    )?;
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    g: &MetricGraph,
    lattice: &SpaceLattice,
    lag: &Lagrangian,
    u0: &InitialDatum,
    start: GraphPoint,
    t: f64,
    duration: f64,
    remaining: usize,
    speeds: &[f64],
    dir_cap: usize,
    segments: &mut Vec<Segment>,
    best: &mut f64,
) -> Result<()> {
    if remaining == 0 {
        let curve = AdmissibleCurve::new(
            g,
            if let Some(first) = segments.first() {
                first.path.start
            } else {
                start
            },
            segments.clone(),
        )?;
        let value = curve.action(lag, t, 32) + u0.eval(lattice, curve.end());
        if value < *best {
            *best = value;
        }
        return Ok(());
    }
    let cur = segments.last().map(|s| s.path.end()).unwrap_or(start);
    for &v in speeds {
        let dist = v * duration;
        if dist <= GEOM_TOL {
            segments.push(Segment {
                duration,
                speed: 0.0,
                path: GraphPath::trivial(cur),
            });
            enumerate(
                g, lattice, lag, u0, start, t, duration, remaining - 1, speeds, dir_cap, segments,
                best,
            )?;
            segments.pop();
        } else {
            let branches = g.walk_paths(cur, dist);
            for (_, path) in branches.into_iter().take(dir_cap) {
                segments.push(Segment {
                    duration,
                    speed: v,
                    path,
                });
                enumerate(
                    g, lattice, lag, u0, start, t, duration, remaining - 1, speeds, dir_cap,
                    segments, best,
                )?;
                segments.pop();
            }
        }
    }
    Ok(())
}
