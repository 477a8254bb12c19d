//! Hamiltonians H(x,p), their standing assumptions, and the dual
//! Lagrangian L(x,v) = sup_p (pv - H(x,p)).
//!
//! Two representations are supported: a composite form σ(x)h(p) - f(x)
//! with h one of a few convex nondecreasing profiles (conjugated in
//! closed form), and a tabulated form sampled on a p-grid per lattice
//! node (conjugated by grid maximization). The Lagrangian genuinely takes
//! the value +∞ — `f64::INFINITY` is used as a first-class value and all
//! consumers treat it with saturating semantics.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{GraphPoint, NodeId, SpaceLattice};

/// Convex profile h(p) of the composite form, with a closed-form convex
/// conjugate l(v) = sup_p (pv - h(p)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HKind {
    /// h(p) = p²/2, l(v) = v²/2.
    Quadratic,
    /// h(p) = p; l(v) = 0 for v ≤ 1 and ∞ beyond.
    Linear,
    /// h(p) = pᵃ/a with a > 1; l(v) = v^b/b with 1/a + 1/b = 1.
    Power(f64),
}

impl HKind {
    pub fn eval(&self, p: f64) -> f64 {
        match *self {
            HKind::Quadratic => 0.5 * p * p,
            HKind::Linear => p,
            HKind::Power(a) => p.powf(a) / a,
        }
    }

    /// Convex conjugate l(v), extended-real valued.
    pub fn conjugate(&self, v: f64) -> f64 {
        match *self {
            HKind::Quadratic => 0.5 * v * v,
            HKind::Linear => {
                if v <= 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            HKind::Power(a) => {
                let b = a / (a - 1.0);
                v.powf(b) / b
            }
        }
    }

    /// Upper edge of the finite domain of l, if bounded.
    fn domain_cap(&self) -> Option<f64> {
        match self {
            HKind::Linear => Some(1.0),
            _ => None,
        }
    }
}

/// A scalar field on the graph: constant, or per-lattice-node values
/// interpolated linearly along edges.
#[derive(Debug, Clone)]
pub enum NodeFn {
    Constant(f64),
    PerNode(Vec<f64>),
}

impl NodeFn {
    pub fn eval(&self, lattice: &SpaceLattice, x: GraphPoint) -> f64 {
        match self {
            NodeFn::Constant(c) => *c,
            NodeFn::PerNode(values) => lattice.interpolate(values, x),
        }
    }

    pub fn node(&self, id: NodeId) -> f64 {
        match self {
            NodeFn::Constant(c) => *c,
            NodeFn::PerNode(values) => values[id],
        }
    }

    /// Resamples onto a finer lattice; only constants survive refinement
    /// exactly, so tables are rejected.
    fn refine(&self) -> Result<NodeFn> {
        match self {
            NodeFn::Constant(c) => Ok(NodeFn::Constant(*c)),
            NodeFn::PerNode(_) => Err(Error::invalid_input(
                "per-node tables cannot be resampled in a refinement study; use constants",
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub enum HamForm {
    Composite {
        sigma: NodeFn,
        h: HKind,
        f: NodeFn,
    },
    Tabulated {
        p_grid: Vec<f64>,
        /// One row per lattice node, H(node, p_grid[j]).
        rows: Vec<Vec<f64>>,
    },
}

/// A Hamiltonian bound to the lattice its node-indexed data lives on.
#[derive(Debug)]
pub struct HamiltonianSpec {
    form: HamForm,
    lattice: Arc<SpaceLattice>,
}

impl HamiltonianSpec {
    pub fn composite(
        lattice: Arc<SpaceLattice>,
        sigma: NodeFn,
        h: HKind,
        f: NodeFn,
    ) -> Result<Self> {
        if let HKind::Power(a) = h {
            if !(a > 1.0) {
                return Err(Error::invalid_input(format!(
                    "power exponent must exceed 1, got {a}"
                )));
            }
        }
        for id in 0..lattice.num_nodes() {
            let s = sigma.node(id);
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::invalid_input(format!(
                    "sigma must be positive and finite, got {s} at node {id}"
                )));
            }
            if !f.node(id).is_finite() {
                return Err(Error::invalid_input(format!(
                    "f must be finite, got {} at node {id}",
                    f.node(id)
                )));
            }
        }
        if let NodeFn::PerNode(v) = &sigma {
            if v.len() != lattice.num_nodes() {
                return Err(Error::invalid_input("sigma table length != node count"));
            }
        }
        if let NodeFn::PerNode(v) = &f {
            if v.len() != lattice.num_nodes() {
                return Err(Error::invalid_input("f table length != node count"));
            }
        }
        Ok(HamiltonianSpec {
            form: HamForm::Composite { sigma, h, f },
            lattice,
        })
    }

    /// Tabulated rows are accepted as given; assumption failures surface
    /// through [`check_assumptions`] and through the operations that
    /// require monotone rows.
    pub fn tabulated(
        lattice: Arc<SpaceLattice>,
        p_grid: Vec<f64>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if p_grid.len() < 2 {
            return Err(Error::invalid_input("p-grid needs at least two points"));
        }
        if p_grid[0] != 0.0 {
            return Err(Error::invalid_input("p-grid must start at 0"));
        }
        if p_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid_input("p-grid must be strictly increasing"));
        }
        if rows.len() != lattice.num_nodes() {
            return Err(Error::invalid_input(format!(
                "tabulated Hamiltonian has {} rows for {} lattice nodes",
                rows.len(),
                lattice.num_nodes()
            )));
        }
        if rows.iter().any(|r| r.len() != p_grid.len()) {
            return Err(Error::invalid_input("row length != p-grid length"));
        }
        Ok(HamiltonianSpec {
            form: HamForm::Tabulated { p_grid, rows },
            lattice,
        })
    }

    pub fn form(&self) -> &HamForm {
        &self.form
    }

    pub fn lattice(&self) -> &Arc<SpaceLattice> {
        &self.lattice
    }

    pub fn is_composite(&self) -> bool {
        matches!(self.form, HamForm::Composite { .. })
    }

    /// H(x, p). Tabulated rows interpolate linearly in p and extrapolate
    /// beyond the grid with the final slope, preserving convexity and
    /// monotonicity of valid rows.
    pub fn eval(&self, x: GraphPoint, p: f64) -> f64 {
        match &self.form {
            HamForm::Composite { sigma, h, f } => {
                sigma.eval(&self.lattice, x) * h.eval(p) - f.eval(&self.lattice, x)
            }
            HamForm::Tabulated { p_grid, rows } => {
                let (lo, hi, frac) = self.lattice.locate(x);
                let a = eval_row(p_grid, &rows[lo], p);
                if lo == hi || frac == 0.0 {
                    a
                } else {
                    (1.0 - frac) * a + frac * eval_row(p_grid, &rows[hi], p)
                }
            }
        }
    }

    /// Supremum of H(·, p) over the lattice nodes (the discrete c_H).
    pub fn sup_over_nodes(&self, p: f64) -> f64 {
        (0..self.lattice.num_nodes())
            .map(|i| self.eval(self.lattice.node_point(i), p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rebinds the Hamiltonian to a refined lattice (constants only).
    pub fn refine(&self, lattice: Arc<SpaceLattice>) -> Result<HamiltonianSpec> {
        match &self.form {
            HamForm::Composite { sigma, h, f } => {
                HamiltonianSpec::composite(lattice, sigma.refine()?, *h, f.refine()?)
            }
            HamForm::Tabulated { .. } => Err(Error::invalid_input(
                "tabulated Hamiltonians cannot be resampled in a refinement study",
            )),
        }
    }

    fn rows_at(&self, x: GraphPoint) -> Option<[NodeId; 2]> {
        match &self.form {
            HamForm::Tabulated { .. } => {
                let (lo, hi, _) = self.lattice.locate(x);
                Some([lo, hi])
            }
            _ => None,
        }
    }
}

fn eval_row(p_grid: &[f64], row: &[f64], p: f64) -> f64 {
    let n = p_grid.len();
    if p >= p_grid[n - 1] {
        let slope = (row[n - 1] - row[n - 2]) / (p_grid[n - 1] - p_grid[n - 2]);
        return row[n - 1] + slope * (p - p_grid[n - 1]);
    }
    let i = match p_grid.binary_search_by(|q| q.total_cmp(&p)) {
        Ok(i) => return row[i],
        Err(i) => i.saturating_sub(1),
    };
    let w = (p - p_grid[i]) / (p_grid[i + 1] - p_grid[i]);
    (1.0 - w) * row[i] + w * row[i + 1]
}

fn row_is_monotone(row: &[f64]) -> bool {
    row.windows(2).all(|w| w[1] >= w[0] - 1e-12)
}

/// sup over p ∈ [0, p_max] (n_p + 1 grid points) of pv - H(x,p), declared
/// +∞ when the first maximizer is the last grid point and the objective is
/// still strictly increasing there.
fn grid_sup(mut objective: impl FnMut(f64) -> f64, v: f64, p_max: f64, n_p: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut best_i = 0usize;
    let mut prev = 0.0;
    for i in 0..=n_p {
        let p = p_max * (i as f64) / (n_p as f64);
        let g = p * v - objective(p);
        if g > best {
            best = g;
            best_i = i;
        }
        if i == n_p - 1 {
            prev = g;
        }
    }
    if best_i == n_p && best - prev > 0.0 {
        f64::INFINITY
    } else {
        best
    }
}

/// The Legendre–Fenchel transform L(x,v) = sup_p (pv - H(x,p)).
///
/// Composite Hamiltonians use the closed-form conjugate
/// σ(x)·l(v/σ(x)) + f(x); everything else goes through the grid.
pub fn legendre_transform(
    ham: &HamiltonianSpec,
    x: GraphPoint,
    v: f64,
    p_max: f64,
    n_p: usize,
) -> Result<f64> {
    if v < 0.0 {
        return Err(Error::invalid_input(format!("speed must be >= 0, got {v}")));
    }
    match &ham.form {
        HamForm::Composite { sigma, h, f } => {
            let s = sigma.eval(&ham.lattice, x);
            Ok(s * h.conjugate(v / s) + f.eval(&ham.lattice, x))
        }
        HamForm::Tabulated { .. } => legendre_transform_grid(ham, x, v, p_max, n_p),
    }
}

/// Grid-only transform path; also the test oracle for the closed forms.
pub fn legendre_transform_grid(
    ham: &HamiltonianSpec,
    x: GraphPoint,
    v: f64,
    p_max: f64,
    n_p: usize,
) -> Result<f64> {
    if v < 0.0 {
        return Err(Error::invalid_input(format!("speed must be >= 0, got {v}")));
    }
    if !(p_max > 0.0) || n_p == 0 {
        return Err(Error::invalid_input("need p_max > 0 and n_p >= 1"));
    }
    if let (HamForm::Tabulated { rows, .. }, Some(ids)) = (&ham.form, ham.rows_at(x)) {
        for id in ids {
            if !row_is_monotone(&rows[id]) {
                return Err(Error::AssumptionViolation(format!(
                    "tabulated row {id} is not nondecreasing in p"
                )));
            }
        }
    }
    Ok(grid_sup(|p| ham.eval(x, p), v, p_max, n_p))
}

/// The Lagrangian dual of a Hamiltonian, with its effective velocity
/// constraint V_L(x) and the lower envelope over the lattice.
#[derive(Debug)]
pub struct Lagrangian {
    ham: Arc<HamiltonianSpec>,
    p_max: f64,
    n_p: usize,
    floor: f64,
}

impl Lagrangian {
    /// Validates tabulated rows once so evaluation can stay infallible.
    pub fn new(ham: Arc<HamiltonianSpec>, p_max: f64, n_p: usize) -> Result<Self> {
        if !(p_max > 0.0) || n_p == 0 {
            return Err(Error::invalid_input("need p_max > 0 and n_p >= 1"));
        }
        if let HamForm::Tabulated { rows, .. } = &ham.form {
            for (id, row) in rows.iter().enumerate() {
                if !row_is_monotone(row) {
                    return Err(Error::AssumptionViolation(format!(
                        "tabulated row {id} is not nondecreasing in p"
                    )));
                }
            }
        }
        let floor = -ham.sup_over_nodes(0.0);
        Ok(Lagrangian {
            ham,
            p_max,
            n_p,
            floor,
        })
    }

    pub fn hamiltonian(&self) -> &Arc<HamiltonianSpec> {
        &self.ham
    }

    pub fn lattice(&self) -> &Arc<SpaceLattice> {
        self.ham.lattice()
    }

    /// L(x, v); +∞ beyond the finite domain.
    pub fn eval(&self, x: GraphPoint, v: f64) -> f64 {
        debug_assert!(v >= 0.0);
        match &self.ham.form {
            HamForm::Composite { sigma, h, f } => {
                let s = sigma.eval(self.lattice(), x);
                s * h.conjugate(v / s) + f.eval(self.lattice(), x)
            }
            HamForm::Tabulated { .. } => grid_sup(|p| self.ham.eval(x, p), v, self.p_max, self.n_p),
        }
    }

    /// V_L(x): supremum of speeds with finite L(x,·). For tabulated rows
    /// this is the final slope of the convex p-profile.
    pub fn v_limit(&self, x: GraphPoint) -> f64 {
        match &self.ham.form {
            HamForm::Composite { sigma, h, .. } => match h.domain_cap() {
                Some(cap) => cap * sigma.eval(self.lattice(), x),
                None => f64::INFINITY,
            },
            HamForm::Tabulated { p_grid, rows } => {
                let (lo, hi, frac) = self.lattice().locate(x);
                let tail = |row: &Vec<f64>| {
                    let n = row.len();
                    (row[n - 1] - row[n - 2]) / (p_grid[n - 1] - p_grid[n - 2])
                };
                let a = tail(&rows[lo]);
                if lo == hi || frac == 0.0 {
                    a
                } else {
                    (1.0 - frac) * a + frac * tail(&rows[hi])
                }
            }
        }
    }

    /// The uniform velocity bound: min of V_L over the lattice nodes
    /// (+∞ when every node is unconstrained).
    pub fn global_v_limit(&self) -> f64 {
        (0..self.lattice().num_nodes())
            .map(|i| self.v_limit(self.lattice().node_point(i)))
            .fold(f64::INFINITY, f64::min)
    }

    /// The global lower bound -c_H(0); L never goes below it.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Pointwise infimum of L(·, v) over the lattice nodes.
    pub fn lower_envelope(&self, v: f64) -> f64 {
        (0..self.lattice().num_nodes())
            .map(|i| self.eval(self.lattice().node_point(i), v))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn conjugation_grid(&self) -> (f64, usize) {
        (self.p_max, self.n_p)
    }
}

/// Discrete sup over v ∈ [0, min(v_max, V_L(x))] of pv - L(x,v); verifies
/// that conjugating the Lagrangian recovers the Hamiltonian.
pub fn dual_roundtrip(
    lag: &Lagrangian,
    x: GraphPoint,
    p: f64,
    v_max: f64,
    n_v: usize,
) -> Result<f64> {
    if p < 0.0 {
        return Err(Error::invalid_input(format!("slope must be >= 0, got {p}")));
    }
    if !(v_max > 0.0) || n_v == 0 {
        return Err(Error::invalid_input("need v_max > 0 and n_v >= 1"));
    }
    let cap = v_max.min(lag.v_limit(x));
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n_v {
        let v = cap * (i as f64) / (n_v as f64);
        let l = lag.eval(x, v);
        if l.is_finite() {
            let g = p * v - l;
            if g > best {
                best = g;
            }
        }
    }
    Ok(best)
}

/// Sample grids used by the assumption checks.
#[derive(Debug, Clone)]
pub struct CheckGrids {
    pub p: Vec<f64>,
    pub v: Vec<f64>,
}

impl Default for CheckGrids {
    fn default() -> Self {
        let mut p = vec![0.0];
        for k in 0..=40 {
            p.push(1e-2 * 1e5f64.powf(k as f64 / 40.0));
        }
        let mut v = vec![0.0];
        for k in 0..=24 {
            v.push(1e-2 * 1e4f64.powf(k as f64 / 24.0));
        }
        CheckGrids { p, v }
    }
}

#[derive(Debug, Clone)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Signed margin; meaning depends on the check (see `detail`).
    pub worst: f64,
    pub detail: String,
    /// Informational entries never fail the report.
    pub informational: bool,
}

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.informational)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Samples the standing assumptions over the lattice and the given grids.
/// Failures are report entries, never errors.
pub fn check_assumptions(
    ham: &HamiltonianSpec,
    lattice: &SpaceLattice,
    grids: &CheckGrids,
) -> AssumptionReport {
    let nodes = lattice.num_nodes();
    let mut checks = Vec::new();

    // Monotonicity and discrete convexity in p at every node.
    let mut worst_mono = f64::INFINITY;
    let mut worst_convex = f64::INFINITY;
    let mut scale = 1.0f64;
    for id in 0..nodes {
        let x = lattice.node_point(id);
        let vals: Vec<f64> = grids.p.iter().map(|&p| ham.eval(x, p)).collect();
        for w in vals.windows(2) {
            worst_mono = worst_mono.min(w[1] - w[0]);
            scale = scale.max(w[1].abs());
        }
        for i in 0..vals.len().saturating_sub(2) {
            let s0 = (vals[i + 1] - vals[i]) / (grids.p[i + 1] - grids.p[i]);
            let s1 = (vals[i + 2] - vals[i + 1]) / (grids.p[i + 2] - grids.p[i + 1]);
            worst_convex = worst_convex.min(s1 - s0);
        }
    }
    let tol = 1e-9 * scale;
    checks.push(AssumptionCheck {
        name: "a2_monotone",
        passed: worst_mono >= -tol,
        worst: worst_mono,
        detail: "min forward difference of H in p".into(),
        informational: false,
    });
    checks.push(AssumptionCheck {
        name: "a2_convex",
        passed: worst_convex >= -tol,
        worst: worst_convex,
        detail: "min slope increment of H in p".into(),
        informational: false,
    });

    // Finiteness of the discrete c_H(p).
    let mut worst_ch = 0.0f64;
    let mut all_finite = true;
    for &p in &grids.p {
        let ch = ham.sup_over_nodes(p);
        if !ch.is_finite() {
            all_finite = false;
        }
        worst_ch = worst_ch.max(ch.abs());
    }
    checks.push(AssumptionCheck {
        name: "a3_bounded",
        passed: all_finite,
        worst: worst_ch,
        detail: "max |c_H(p)| over the p-grid".into(),
        informational: false,
    });

    // Coercivity proxy: the lower slope inf_x H(x,P)/P at the grid tail
    // must be positive and not decaying towards zero.
    let p_tail = *grids.p.last().unwrap();
    let inf_slope_at = |p: f64| {
        (0..nodes)
            .map(|i| ham.eval(lattice.node_point(i), p) / p)
            .fold(f64::INFINITY, f64::min)
    };
    let slope_tail = inf_slope_at(p_tail);
    let slope_half = inf_slope_at(0.5 * p_tail);
    let floor = (0..nodes)
        .map(|i| ham.eval(lattice.node_point(i), 0.0))
        .fold(f64::INFINITY, f64::min);
    let growth_ok = slope_tail > 1e-9 && slope_tail >= 0.9 * slope_half && floor.is_finite();
    checks.push(AssumptionCheck {
        name: "a4_growth",
        passed: growth_ok,
        worst: slope_tail,
        detail: format!(
            "inf_x H/p at p = {p_tail}: {slope_tail:.6e} (at p/2: {slope_half:.6e})"
        ),
        informational: false,
    });

    // Effective velocity bound: sup_x L(x, V) must be finite at the
    // detected uniform bound V.
    let detected_v = detected_velocity_bound(ham, lattice);
    let v_test = if detected_v.is_finite() {
        detected_v
    } else {
        *grids.v.last().unwrap()
    };
    let n_p = 512;
    let sup_l = (0..nodes)
        .map(|i| grid_sup(|p| ham.eval(lattice.node_point(i), p), v_test, p_tail, n_p))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(AssumptionCheck {
        name: "a4p_finite_speed",
        passed: sup_l.is_finite(),
        worst: sup_l,
        detail: format!("sup_x L(x, {v_test:.6}) via the grid transform"),
        informational: false,
    });

    // Sampled continuity of L along edges and V_L jumps: recorded, not
    // enforced (finitely many samples cannot falsify semicontinuity).
    let l_samples: Vec<Vec<f64>> = (0..nodes)
        .map(|i| {
            let x = lattice.node_point(i);
            grids
                .v
                .iter()
                .map(|&v| grid_sup(|p| ham.eval(x, p), v, p_tail, 256))
                .collect()
        })
        .collect();
    let mut worst_jump = 0.0f64;
    let mut worst_vl_jump = 0.0f64;
    for id in 0..nodes {
        for &(nb, dist) in lattice.adjacency(id) {
            for (vi, _) in grids.v.iter().enumerate() {
                let (a, b) = (l_samples[id][vi], l_samples[nb][vi]);
                if a.is_finite() && b.is_finite() {
                    worst_jump = worst_jump.max((a - b).abs() / dist.max(1e-12));
                }
            }
        }
    }
    let vls: Vec<f64> = (0..nodes)
        .map(|i| detected_velocity_bound_at(ham, lattice, i))
        .collect();
    for id in 0..nodes {
        for &(nb, _) in lattice.adjacency(id) {
            if vls[id].is_finite() && vls[nb].is_finite() {
                worst_vl_jump = worst_vl_jump.max((vls[id] - vls[nb]).abs());
            }
        }
    }
    checks.push(AssumptionCheck {
        name: "a5_sampled_continuity",
        passed: true,
        worst: worst_jump,
        detail: "max |ΔL|/Δd across adjacent nodes (informational)".into(),
        informational: true,
    });
    checks.push(AssumptionCheck {
        name: "a5_vl_jumps",
        passed: true,
        worst: worst_vl_jump,
        detail: "max V_L jump across adjacent nodes (informational)".into(),
        informational: true,
    });

    AssumptionReport { checks }
}

fn detected_velocity_bound_at(ham: &HamiltonianSpec, lattice: &SpaceLattice, id: NodeId) -> f64 {
    let x = lattice.node_point(id);
    match &ham.form {
        HamForm::Composite { sigma, h, .. } => match h.domain_cap() {
            Some(cap) => cap * sigma.eval(lattice, x),
            None => f64::INFINITY,
        },
        HamForm::Tabulated { p_grid, rows } => {
            let row = &rows[id];
            let n = row.len();
            (row[n - 1] - row[n - 2]) / (p_grid[n - 1] - p_grid[n - 2])
        }
    }
}

fn detected_velocity_bound(ham: &HamiltonianSpec, lattice: &SpaceLattice) -> f64 {
    (0..lattice.num_nodes())
        .map(|i| detected_velocity_bound_at(ham, lattice, i))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeId, MetricGraph};

    fn unit_edge_lattice(dx: f64) -> Arc<SpaceLattice> {
        let g = Arc::new(MetricGraph::new(vec![0, 1], vec![(0, 1, 1.0)]).unwrap());
        Arc::new(SpaceLattice::build(g, dx).unwrap())
    }

    fn quadratic_ham(lat: Arc<SpaceLattice>) -> Arc<HamiltonianSpec> {
        Arc::new(
            HamiltonianSpec::composite(
                lat,
                NodeFn::Constant(1.0),
                HKind::Quadratic,
                NodeFn::Constant(0.0),
            )
            .unwrap(),
        )
    }

    fn eikonal_ham(lat: Arc<SpaceLattice>) -> Arc<HamiltonianSpec> {
        Arc::new(
            HamiltonianSpec::composite(
                lat,
                NodeFn::Constant(1.0),
                HKind::Linear,
                NodeFn::Constant(0.0),
            )
            .unwrap(),
        )
    }

    fn mid(_lat: &SpaceLattice) -> GraphPoint {
        GraphPoint::new(EdgeId(0), 0.5)
    }

    #[test]
    fn quadratic_transform_matches_half_v_squared() {
        let lat = unit_edge_lattice(0.25);
        let ham = quadratic_ham(lat.clone());
        let l = legendre_transform(&ham, mid(&lat), 2.0, 10.0, 1024).unwrap();
        assert!((l - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eikonal_transform_saturates() {
        let lat = unit_edge_lattice(0.25);
        let ham = eikonal_ham(lat.clone());
        let inside = legendre_transform(&ham, mid(&lat), 0.5, 10.0, 1024).unwrap();
        assert_eq!(inside, 0.0);
        let outside = legendre_transform(&ham, mid(&lat), 1.5, 10.0, 1024).unwrap();
        assert!(outside.is_infinite());
    }

    #[test]
    fn constant_hamiltonian_transform() {
        let lat = unit_edge_lattice(0.25);
        let c = 0.7;
        let rows = vec![vec![c, c, c]; lat.num_nodes()];
        let ham = HamiltonianSpec::tabulated(lat.clone(), vec![0.0, 1.0, 2.0], rows).unwrap();
        let at_zero = legendre_transform(&ham, mid(&lat), 0.0, 10.0, 1024).unwrap();
        assert!((at_zero + c).abs() < 1e-12);
        let positive = legendre_transform(&ham, mid(&lat), 0.3, 10.0, 1024).unwrap();
        assert!(positive.is_infinite());
    }

    #[test]
    fn grid_path_tracks_closed_form() {
        let lat = unit_edge_lattice(0.25);
        let ham = quadratic_ham(lat.clone());
        // Oracle route: the grid transform with spacing 10/4096.
        for v in [0.0, 0.5, 1.7, 3.0, 5.0] {
            let closed = legendre_transform(&ham, mid(&lat), v, 10.0, 4096).unwrap();
            let grid = legendre_transform_grid(&ham, mid(&lat), v, 10.0, 4096).unwrap();
            assert!((closed - grid).abs() < 1e-3, "v={v}: {closed} vs {grid}");
        }
    }

    #[test]
    fn negative_speed_is_input_error() {
        let lat = unit_edge_lattice(0.25);
        let ham = quadratic_ham(lat.clone());
        assert!(legendre_transform(&ham, mid(&lat), -1.0, 10.0, 64).is_err());
    }

    #[test]
    fn non_monotone_row_is_assumption_violation() {
        let lat = unit_edge_lattice(0.25);
        let rows = vec![vec![0.0, -1.0, -2.0]; lat.num_nodes()];
        let ham = HamiltonianSpec::tabulated(lat.clone(), vec![0.0, 1.0, 2.0], rows).unwrap();
        let err = legendre_transform_grid(&ham, mid(&lat), 1.0, 10.0, 64).unwrap_err();
        assert!(matches!(err, Error::AssumptionViolation(_)));
        assert!(Lagrangian::new(Arc::new(ham), 10.0, 64).is_err());
    }

    #[test]
    fn roundtrip_recovers_quadratic() {
        let lat = unit_edge_lattice(0.25);
        let lag = Lagrangian::new(quadratic_ham(lat.clone()), 10.0, 1024).unwrap();
        // Conjugate of v²/2 at p = 3 is 4.5 (oracle: closed form).
        let rt = dual_roundtrip(&lag, mid(&lat), 3.0, 8.0, 4096).unwrap();
        assert!((rt - 4.5).abs() < 1e-5, "got {rt}");
        let at_zero = dual_roundtrip(&lag, mid(&lat), 0.0, 8.0, 4096).unwrap();
        assert!(at_zero.abs() < 1e-12);
    }

    #[test]
    fn roundtrip_recovers_eikonal() {
        let lat = unit_edge_lattice(0.25);
        let lag = Lagrangian::new(eikonal_ham(lat.clone()), 10.0, 1024).unwrap();
        // sup over v ≤ 1 of 2v is attained at the domain edge v = 1.
        let rt = dual_roundtrip(&lag, mid(&lat), 2.0, 8.0, 4096).unwrap();
        assert!((rt - 2.0).abs() < 1e-9, "got {rt}");
    }

    #[test]
    fn lower_envelope_quadratic() {
        let lat = unit_edge_lattice(0.25);
        let n = lat.num_nodes();
        let f: Vec<f64> = (0..n).map(|i| 0.1 + 0.05 * i as f64).collect();
        let ham = Arc::new(
            HamiltonianSpec::composite(
                lat.clone(),
                NodeFn::Constant(1.0),
                HKind::Quadratic,
                NodeFn::PerNode(f.clone()),
            )
            .unwrap(),
        );
        let lag = Lagrangian::new(ham, 10.0, 1024).unwrap();
        for v in [0.0, 1.0, 2.5] {
            // Oracle: minimize the closed form over the nodes directly.
            let expect = (0..n)
                .map(|i| 0.5 * v * v + f[i])
                .fold(f64::INFINITY, f64::min);
            assert!((lag.lower_envelope(v) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn lower_envelope_saturates_beyond_domain() {
        let lat = unit_edge_lattice(0.25);
        let lag = Lagrangian::new(eikonal_ham(lat.clone()), 10.0, 1024).unwrap();
        assert_eq!(lag.lower_envelope(0.0), 0.0);
        assert!(lag.lower_envelope(2.0).is_infinite());
    }

    #[test]
    fn assumptions_pass_for_quadratic_example() {
        let lat = unit_edge_lattice(0.25);
        let ham = quadratic_ham(lat.clone());
        let report = check_assumptions(&ham, &lat, &CheckGrids::default());
        assert!(report.all_passed(), "{report:?}");
    }

    #[test]
    fn decreasing_hamiltonian_fails_monotonicity() {
        let lat = unit_edge_lattice(0.25);
        let grids = CheckGrids::default();
        let p_grid = vec![0.0, 1.0, 2.0, 4.0];
        let rows = vec![vec![0.0, -1.0, -2.0, -4.0]; lat.num_nodes()];
        let ham = HamiltonianSpec::tabulated(lat.clone(), p_grid, rows).unwrap();
        let report = check_assumptions(&ham, &lat, &grids);
        assert!(!report.get("a2_monotone").unwrap().passed);
    }

    #[test]
    fn sublinear_growth_fails_coercivity() {
        let lat = unit_edge_lattice(0.25);
        let grids = CheckGrids::default();
        // H(x,p) = sqrt(p): the lower slope at the grid tail decays to 0.
        let p_grid: Vec<f64> = (0..64).map(|i| i as f64 * 16.0).collect();
        let rows = vec![p_grid.iter().map(|p| p.sqrt()).collect::<Vec<_>>(); lat.num_nodes()];
        let ham = HamiltonianSpec::tabulated(lat.clone(), p_grid, rows).unwrap();
        let report = check_assumptions(&ham, &lat, &grids);
        let growth = report.get("a4_growth").unwrap();
        assert!(!growth.passed);
        // Derived check: the tail slope itself is already small.
        assert!(growth.worst < 0.05, "tail slope {}", growth.worst);
    }

    #[test]
    fn conjugacy_order_is_exact_on_the_grid() {
        let lat = unit_edge_lattice(0.25);
        let ham = quadratic_ham(lat.clone());
        let x = mid(&lat);
        let (p_max, n_p) = (10.0, 512);
        for vi in 0..=16 {
            let v = 4.0 * vi as f64 / 16.0;
            let l = legendre_transform_grid(&ham, x, v, p_max, n_p).unwrap();
            if !l.is_finite() {
                continue;
            }
            for pi in 0..=n_p {
                let p = p_max * pi as f64 / n_p as f64;
                // Rearranged form of the conjugacy order: pv - H <= L,
                // exact because L is the max of these very terms.
                assert!(p * v - ham.eval(x, p) <= l);
            }
        }
    }

    #[test]
    fn lagrangian_is_discretely_convex_in_v() {
        let lat = unit_edge_lattice(0.25);
        for ham in [quadratic_ham(lat.clone()), eikonal_ham(lat.clone())] {
            let lag = Lagrangian::new(ham, 10.0, 1024).unwrap();
            let x = mid(&lat);
            let vs: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
            let ls: Vec<f64> = vs.iter().map(|&v| lag.eval(x, v)).collect();
            for w in ls.windows(3) {
                if w.iter().all(|l| l.is_finite()) {
                    assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-9);
                }
            }
        }
    }

    #[test]
    fn closed_form_matches_scaled_conjugate() {
        // L(x,v) = σ(x)·l(v/σ(x)) + f(x) for the composite form.
        let lat = unit_edge_lattice(0.25);
        let n = lat.num_nodes();
        let sigma: Vec<f64> = (0..n).map(|i| 0.8 + 0.1 * i as f64).collect();
        let f: Vec<f64> = (0..n).map(|i| -0.2 + 0.07 * i as f64).collect();
        let ham = Arc::new(
            HamiltonianSpec::composite(
                lat.clone(),
                NodeFn::PerNode(sigma.clone()),
                HKind::Quadratic,
                NodeFn::PerNode(f.clone()),
            )
            .unwrap(),
        );
        for id in 0..n {
            let x = lat.node_point(id);
            let v = 1.3;
            let got = legendre_transform(&ham, x, v, 10.0, 64).unwrap();
            let want = sigma[id] * (v / sigma[id]).powi(2) / 2.0 + f[id];
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn floor_bounds_the_lagrangian() {
        let lat = unit_edge_lattice(0.25);
        let ham = Arc::new(
            HamiltonianSpec::composite(
                lat.clone(),
                NodeFn::Constant(2.0),
                HKind::Quadratic,
                NodeFn::Constant(0.4),
            )
            .unwrap(),
        );
        let lag = Lagrangian::new(ham, 10.0, 256).unwrap();
        for vi in 0..40 {
            let v = vi as f64 * 0.1;
            let x = mid(&lat);
            let l = lag.eval(x, v);
            if l.is_finite() {
                assert!(l >= lag.floor() - 1e-12);
            }
        }
    }
}
