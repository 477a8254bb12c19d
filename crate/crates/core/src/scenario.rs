//! Scenario files: a line-oriented key/value format with a strict schema
//! (unknown keys are errors), external per-node tables, and full
//! validation at load. A loaded scenario carries the assembled graph,
//! lattice, Hamiltonian, Lagrangian and initial datum, ready for any
//! command.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, MetricGraph, SpaceLattice};
use crate::hamiltonian::{HKind, HamiltonianSpec, Lagrangian, NodeFn};
use crate::solver::{
    default_v_count, default_v_max, speed_grid, InitialDatum, InitialKind, OracleKind,
    RefineSetup, VPolicy, MAX_MOVE_CELLS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Min,
    Max,
}

#[derive(Debug, Clone)]
pub struct VerifyParams {
    pub seed: u64,
    pub curve_samples: usize,
    pub triple_samples: usize,
    pub trajectory_samples: usize,
    pub viscosity_curves: usize,
    pub viscosity_c2: f64,
    pub inject_corruption: bool,
}

#[derive(Debug, Clone)]
pub struct TransformParams {
    pub v_max: f64,
    pub n_v: usize,
}

#[derive(Debug, Clone)]
pub struct ConvergeParams {
    pub levels: usize,
    pub oracle: Option<OracleKind>,
}

/// CLI-level overrides applied before assembly.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub orientation: Option<Orientation>,
}

/// A fully assembled scenario. With `orientation = max` the composite f
/// and the initial datum are negated before solving (the minimization
/// machinery then computes the negated maximization problem) and
/// `negate_output` asks the emitters to flip the sign back.
#[derive(Debug)]
pub struct Scenario {
    pub name: String,
    pub graph: Arc<MetricGraph>,
    pub lattice: Arc<SpaceLattice>,
    pub ham: Arc<HamiltonianSpec>,
    pub lag: Arc<Lagrangian>,
    pub u0: InitialDatum,
    pub u0_kind: InitialKind,
    pub t_horizon: f64,
    pub dt: f64,
    pub dx: f64,
    pub v_policy: VPolicy,
    pub v_count: Option<usize>,
    pub orientation: Orientation,
    pub negate_output: bool,
    pub probes: Vec<(EdgeId, f64, f64)>,
    pub verify: VerifyParams,
    pub transform: TransformParams,
    pub converge: ConvergeParams,
    pub p_max: f64,
    pub n_p: usize,
    composite: Option<(HKind, Option<f64>, Option<f64>)>,
}

impl Scenario {
    /// The speed grid the solver will use.
    pub fn speed_grid(&self) -> Vec<f64> {
        speed_grid(
            self.v_policy,
            default_v_max(&self.lag, self.dx, self.dt),
            self.v_count.unwrap_or_else(|| default_v_count(self.dx)),
        )
    }

    /// Conversion for the converge command; requires constant composite
    /// fields, a closed-form initial datum and a declared oracle.
    pub fn refine_setup(&self) -> Result<RefineSetup> {
        let (h, sigma, f) = self.composite.ok_or_else(|| {
            Error::validation(
                "converge.oracle",
                "refinement studies need the composite Hamiltonian form",
            )
        })?;
        let (sigma, f) = match (sigma, f) {
            (Some(s), Some(f)) => (s, f),
            _ => {
                return Err(Error::validation(
                    "hamiltonian.sigma",
                    "refinement studies need constant sigma and f",
                ))
            }
        };
        let oracle = self.converge.oracle.ok_or_else(|| {
            Error::validation("converge.oracle", "converge needs an oracle declaration")
        })?;
        if self.u0_kind == InitialKind::Table {
            return Err(Error::validation(
                "initial",
                "refinement studies need a closed-form initial datum",
            ));
        }
        Ok(RefineSetup {
            graph: self.graph.clone(),
            h,
            sigma,
            f,
            u0: self.u0_kind,
            t_horizon: self.t_horizon,
            dx: self.dx,
            dt: self.dt,
            policy: self.v_policy,
            v_count: self.v_count,
            oracle,
            p_max: self.p_max,
            n_p: self.n_p,
        })
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    load_scenario_with(path, Overrides::default())
}

/// Raw field values as parsed, before assembly.
#[derive(Default)]
struct RawScenario {
    vertices: Option<Vec<usize>>,
    edges: Vec<(usize, usize, f64)>,
    form: Option<String>,
    h: Option<HKind>,
    sigma: Option<FieldValue>,
    f: Option<FieldValue>,
    table: Option<PathBuf>,
    p_max: Option<f64>,
    n_p: Option<usize>,
    initial: Option<RawInitial>,
    t_horizon: Option<f64>,
    dt: Option<f64>,
    dx: Option<f64>,
    v_policy: Option<VPolicy>,
    v_count: Option<usize>,
    orientation: Option<Orientation>,
    probes: Vec<(usize, f64, f64)>,
    verify: VerifyParams,
    transform: TransformParams,
    converge: ConvergeParams,
}

enum FieldValue {
    Constant(f64),
    Table(PathBuf),
}

enum RawInitial {
    Constant(f64),
    DistanceToVertex(usize),
    Bump { vertex: usize, height: f64, width: f64 },
    Table(PathBuf),
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            seed: 0,
            curve_samples: 200,
            triple_samples: 20,
            trajectory_samples: 20,
            viscosity_curves: 30,
            viscosity_c2: 50.0,
            inject_corruption: false,
        }
    }
}

impl Default for TransformParams {
    fn default() -> Self {
        TransformParams {
            v_max: 5.0,
            n_v: 256,
        }
    }
}

impl Default for ConvergeParams {
    fn default() -> Self {
        ConvergeParams {
            levels: 3,
            oracle: None,
        }
    }
}

pub fn load_scenario_with(path: &Path, overrides: Overrides) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut raw = RawScenario::default();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: "expected `key = value`".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        parse_field(&mut raw, key, value, &dir).map_err(|e| match e {
            Error::Validation { .. } => e,
            other => Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: other.to_string(),
            },
        })?;
    }

    assemble(path, raw, overrides)
}

fn parse_field(raw: &mut RawScenario, key: &str, value: &str, dir: &Path) -> Result<()> {
    let bad = |reason: &str| Error::validation(key, reason);
    match key {
        "vertices" => {
            let ids = value
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("expected whitespace-separated vertex ids"))?;
            raw.vertices = Some(ids);
        }
        "edge" => {
            let toks: Vec<&str> = value.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(bad("expected `edge = u v length`"));
            }
            let u = toks[0].parse().map_err(|_| bad("bad vertex id"))?;
            let v = toks[1].parse().map_err(|_| bad("bad vertex id"))?;
            let len = toks[2].parse().map_err(|_| bad("bad length"))?;
            raw.edges.push((u, v, len));
        }
        "hamiltonian.form" => raw.form = Some(value.to_string()),
        "hamiltonian.h" => {
            let toks: Vec<&str> = value.split_whitespace().collect();
            raw.h = Some(match toks.as_slice() {
                ["quadratic"] => HKind::Quadratic,
                ["linear"] => HKind::Linear,
                ["power", a] => {
                    HKind::Power(a.parse().map_err(|_| bad("bad power exponent"))?)
                }
                _ => return Err(bad("expected quadratic | linear | power <a>")),
            });
        }
        "hamiltonian.sigma" => raw.sigma = Some(parse_field_value(value, dir, key)?),
        "hamiltonian.f" => raw.f = Some(parse_field_value(value, dir, key)?),
        "hamiltonian.table" => raw.table = Some(resolve(dir, value, key)?),
        "hamiltonian.p_max" => {
            raw.p_max = Some(parse_positive(value, key)?);
        }
        "hamiltonian.n_p" => {
            raw.n_p = Some(parse_count(value, key)?);
        }
        "initial" => {
            let toks: Vec<&str> = value.split_whitespace().collect();
            raw.initial = Some(match toks.as_slice() {
                ["constant", c] => {
                    RawInitial::Constant(c.parse().map_err(|_| bad("bad constant"))?)
                }
                ["distance_to_vertex", v] => RawInitial::DistanceToVertex(
                    v.parse().map_err(|_| bad("bad vertex id"))?,
                ),
                ["bump", v, h, w] => RawInitial::Bump {
                    vertex: v.parse().map_err(|_| bad("bad vertex id"))?,
                    height: h.parse().map_err(|_| bad("bad height"))?,
                    width: w.parse().map_err(|_| bad("bad width"))?,
                },
                ["table", p] => RawInitial::Table(resolve(dir, p, key)?),
                _ => {
                    return Err(bad(
                        "expected constant <c> | distance_to_vertex <v> | bump <v> <h> <w> | table <path>",
                    ))
                }
            });
        }
        "solver.T" => raw.t_horizon = Some(parse_positive(value, key)?),
        "solver.dt" => raw.dt = Some(parse_positive(value, key)?),
        "solver.dx" => raw.dx = Some(parse_positive(value, key)?),
        "solver.v_policy" => {
            raw.v_policy = Some(match value {
                "geometric" => VPolicy::Geometric,
                "uniform" => VPolicy::Uniform,
                _ => return Err(bad("expected geometric | uniform")),
            });
        }
        "solver.v_count" => raw.v_count = Some(parse_count(value, key)?),
        "solver.orientation" => {
            raw.orientation = Some(match value {
                "min" => Orientation::Min,
                "max" => Orientation::Max,
                _ => return Err(bad("expected min | max")),
            });
        }
        "probe" => {
            let toks: Vec<&str> = value.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(bad("expected `probe = edge offset t`"));
            }
            raw.probes.push((
                toks[0].parse().map_err(|_| bad("bad edge id"))?,
                toks[1].parse().map_err(|_| bad("bad offset"))?,
                toks[2].parse().map_err(|_| bad("bad time"))?,
            ));
        }
        "verify.seed" => raw.verify.seed = value.parse().map_err(|_| bad("bad seed"))?,
        "verify.curve_samples" => raw.verify.curve_samples = parse_count(value, key)?,
        "verify.triple_samples" => raw.verify.triple_samples = parse_count(value, key)?,
        "verify.trajectory_samples" => {
            raw.verify.trajectory_samples = parse_count(value, key)?
        }
        "verify.viscosity_curves" => raw.verify.viscosity_curves = parse_count(value, key)?,
        "verify.viscosity_c2" => raw.verify.viscosity_c2 = parse_positive(value, key)?,
        "verify.inject_corruption" => {
            raw.verify.inject_corruption = match value {
                "true" => true,
                "false" => false,
                _ => return Err(bad("expected true | false")),
            };
        }
        "transform.v_max" => raw.transform.v_max = parse_positive(value, key)?,
        "transform.n_v" => raw.transform.n_v = parse_count(value, key)?,
        "converge.levels" => raw.converge.levels = parse_count(value, key)?,
        "converge.oracle" => {
            raw.converge.oracle = Some(match value {
                "constant" => OracleKind::Constant,
                "eikonal_ball" => OracleKind::EikonalBall,
                "hopf_lax" => OracleKind::HopfLaxQuadratic,
                _ => return Err(bad("expected constant | eikonal_ball | hopf_lax")),
            });
        }
        _ => {
            return Err(Error::validation(key, "unknown key"));
        }
    }
    Ok(())
}

fn parse_field_value(value: &str, dir: &Path, key: &str) -> Result<FieldValue> {
    let toks: Vec<&str> = value.split_whitespace().collect();
    match toks.as_slice() {
        ["table", p] => Ok(FieldValue::Table(resolve(dir, p, key)?)),
        [c] => c
            .parse()
            .map(FieldValue::Constant)
            .map_err(|_| Error::validation(key, "expected a number or `table <path>`")),
        _ => Err(Error::validation(key, "expected a number or `table <path>`")),
    }
}

fn parse_positive(value: &str, key: &str) -> Result<f64> {
    let x: f64 = value
        .parse()
        .map_err(|_| Error::validation(key, "expected a number"))?;
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::validation(key, "must be positive"));
    }
    Ok(x)
}

fn parse_count(value: &str, key: &str) -> Result<usize> {
    let n: usize = value
        .parse()
        .map_err(|_| Error::validation(key, "expected a positive integer"))?;
    if n == 0 {
        return Err(Error::validation(key, "must be at least 1"));
    }
    Ok(n)
}

fn resolve(dir: &Path, rel: &str, key: &str) -> Result<PathBuf> {
    let p = dir.join(rel);
    if !p.exists() {
        return Err(Error::validation(
            key,
            format!("referenced path {} does not exist", p.display()),
        ));
    }
    Ok(p)
}

fn assemble(path: &Path, raw: RawScenario, overrides: Overrides) -> Result<Scenario> {
    let vertices = raw
        .vertices
        .ok_or_else(|| Error::validation("vertices", "missing"))?;
    if raw.edges.is_empty() {
        return Err(Error::validation("edge", "at least one edge is required"));
    }
    let graph = Arc::new(
        MetricGraph::new(vertices, raw.edges)
            .map_err(|e| Error::validation("edge", e.to_string()))?,
    );
    let t_horizon = raw
        .t_horizon
        .ok_or_else(|| Error::validation("solver.T", "missing"))?;
    let dt = raw
        .dt
        .ok_or_else(|| Error::validation("solver.dt", "missing"))?;
    let dx = raw
        .dx
        .ok_or_else(|| Error::validation("solver.dx", "missing"))?;
    let lattice = Arc::new(
        SpaceLattice::build(graph.clone(), dx)
            .map_err(|e| Error::validation("solver.dx", e.to_string()))?,
    );
    let orientation = overrides
        .orientation
        .unwrap_or(raw.orientation.unwrap_or(Orientation::Min));
    let negate = orientation == Orientation::Max;

    // Hamiltonian assembly (f negated under the max orientation).
    let form = raw
        .form
        .ok_or_else(|| Error::validation("hamiltonian.form", "missing"))?;
    let p_max = raw
        .p_max
        .unwrap_or_else(|| 10.0 * (1.0 + MAX_MOVE_CELLS * dx / dt));
    let n_p = raw.n_p.unwrap_or(1024);
    let (ham, composite) = match form.as_str() {
        "composite" => {
            let h = raw
                .h
                .ok_or_else(|| Error::validation("hamiltonian.h", "missing for composite form"))?;
            let sigma = node_fn(
                raw.sigma.unwrap_or(FieldValue::Constant(1.0)),
                &lattice,
                "hamiltonian.sigma",
                false,
            )?;
            let f = node_fn(
                raw.f.unwrap_or(FieldValue::Constant(0.0)),
                &lattice,
                "hamiltonian.f",
                negate,
            )?;
            let consts = match (&sigma, &f) {
                (NodeFn::Constant(s), NodeFn::Constant(fc)) => (h, Some(*s), Some(*fc)),
                (NodeFn::Constant(s), _) => (h, Some(*s), None),
                (_, NodeFn::Constant(fc)) => (h, None, Some(*fc)),
                _ => (h, None, None),
            };
            let ham = HamiltonianSpec::composite(lattice.clone(), sigma, h, f)
                .map_err(|e| Error::validation("hamiltonian.sigma", e.to_string()))?;
            (Arc::new(ham), Some(consts))
        }
        "tabulated" => {
            if negate {
                return Err(Error::validation(
                    "solver.orientation",
                    "max orientation needs the composite form (f is negated)",
                ));
            }
            let table = raw
                .table
                .ok_or_else(|| Error::validation("hamiltonian.table", "missing for tabulated form"))?;
            let (p_grid, rows) = read_h_table(&table, lattice.num_nodes())?;
            let ham = HamiltonianSpec::tabulated(lattice.clone(), p_grid, rows)
                .map_err(|e| Error::validation("hamiltonian.table", e.to_string()))?;
            (Arc::new(ham), None)
        }
        _ => {
            return Err(Error::validation(
                "hamiltonian.form",
                "expected composite | tabulated",
            ))
        }
    };
    let lag = Arc::new(
        Lagrangian::new(ham.clone(), p_max, n_p)
            .map_err(|e| Error::validation("hamiltonian.p_max", e.to_string()))?,
    );

    // Initial datum (negated under the max orientation).
    let raw_initial = raw
        .initial
        .ok_or_else(|| Error::validation("initial", "missing"))?;
    let (u0, u0_kind) = build_initial(raw_initial, &graph, &lattice, negate)?;

    // Probe validation.
    let mut probes = Vec::with_capacity(raw.probes.len());
    for (e, offset, t) in raw.probes {
        if e >= graph.num_edges() {
            return Err(Error::validation("probe", format!("unknown edge {e}")));
        }
        let len = graph.edge(EdgeId(e)).length;
        if !(0.0..=len).contains(&offset) {
            return Err(Error::validation(
                "probe",
                format!("offset {offset} outside [0, {len}]"),
            ));
        }
        if !(0.0..=t_horizon + 1e-12).contains(&t) {
            return Err(Error::validation(
                "probe",
                format!("time {t} outside [0, {t_horizon}]"),
            ));
        }
        probes.push((EdgeId(e), offset, t));
    }

    let mut verify = raw.verify;
    if let Some(seed) = overrides.seed {
        verify.seed = seed;
    }

    Ok(Scenario {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into()),
        graph,
        lattice,
        ham,
        lag,
        u0,
        u0_kind,
        t_horizon,
        dt,
        dx,
        v_policy: raw.v_policy.unwrap_or(VPolicy::Geometric),
        v_count: raw.v_count,
        orientation,
        negate_output: negate,
        probes,
        verify,
        transform: raw.transform,
        converge: raw.converge,
        p_max,
        n_p,
        composite,
    })
}

fn node_fn(
    value: FieldValue,
    lattice: &Arc<SpaceLattice>,
    key: &str,
    negate: bool,
) -> Result<NodeFn> {
    let f = match value {
        FieldValue::Constant(c) => NodeFn::Constant(if negate { -c } else { c }),
        FieldValue::Table(path) => {
            let mut values = read_node_table(&path, lattice.num_nodes())?;
            if negate {
                for v in &mut values {
                    *v = -*v;
                }
            }
            NodeFn::PerNode(values)
        }
    };
    if let NodeFn::PerNode(v) = &f {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation(key, "table values must be finite"));
        }
    }
    Ok(f)
}

fn build_initial(
    raw: RawInitial,
    graph: &Arc<MetricGraph>,
    lattice: &Arc<SpaceLattice>,
    negate: bool,
) -> Result<(InitialDatum, InitialKind)> {
    let kind = match raw {
        RawInitial::Constant(c) => InitialKind::Constant(if negate { -c } else { c }),
        RawInitial::DistanceToVertex(id) => {
            let v = graph
                .vertex_by_id(id)
                .map_err(|e| Error::validation("initial", e.to_string()))?;
            if negate {
                // No closed form for the negated distance; fall back to a
                // per-node table.
                let base = InitialDatum::sample(InitialKind::DistanceToVertex(v), lattice)
                    .map_err(|e| Error::validation("initial", e.to_string()))?;
                let values = base.values().iter().map(|x| -x).collect();
                let datum = InitialDatum::from_values(lattice, values)
                    .map_err(|e| Error::validation("initial", e.to_string()))?;
                return Ok((datum, InitialKind::Table));
            }
            InitialKind::DistanceToVertex(v)
        }
        RawInitial::Bump {
            vertex,
            height,
            width,
        } => {
            if !(width > 0.0) {
                return Err(Error::validation("initial", "bump width must be positive"));
            }
            let v = graph
                .vertex_by_id(vertex)
                .map_err(|e| Error::validation("initial", e.to_string()))?;
            InitialKind::Bump {
                center: v,
                height: if negate { -height } else { height },
                width,
            }
        }
        RawInitial::Table(path) => {
            let mut values = read_node_table(&path, lattice.num_nodes())?;
            if negate {
                for v in &mut values {
                    *v = -*v;
                }
            }
            let datum = InitialDatum::from_values(lattice, values)
                .map_err(|e| Error::validation("initial", e.to_string()))?;
            return Ok((datum, InitialKind::Table));
        }
    };
    let datum = InitialDatum::sample(kind, lattice)
        .map_err(|e| Error::validation("initial", e.to_string()))?;
    Ok((datum, kind))
}

/// Per-node scalar table: lines `node_id,value`, every node exactly once.
fn read_node_table(path: &Path, n_nodes: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut values = vec![f64::NAN; n_nodes];
    let mut seen = vec![false; n_nodes];
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let (id, value) = line
            .split_once(',')
            .ok_or_else(|| err("expected `node_id,value`".into()))?;
        let id: usize = id
            .trim()
            .parse()
            .map_err(|_| err("bad node id".into()))?;
        if id >= n_nodes {
            return Err(err(format!("node id {id} out of range 0..{n_nodes}")));
        }
        if seen[id] {
            return Err(err(format!("duplicate node id {id}")));
        }
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| err("bad value".into()))?;
        seen[id] = true;
        values[id] = v;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("missing value for node {missing}"),
        });
    }
    Ok(values)
}

/// Tabulated Hamiltonian: header `p,<p0>,<p1>,...`, then one row per
/// lattice node, `node_id,<H values>`. The literal `inf` is accepted.
fn read_h_table(path: &Path, n_nodes: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let l = l.trim();
        !l.is_empty() && !l.starts_with('#')
    });
    let (hidx, header) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "empty table".into(),
    })?;
    let mut toks = header.split(',');
    if toks.next().map(str::trim) != Some("p") {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: hidx + 1,
            message: "header must start with `p`".into(),
        });
    }
    let p_grid = toks
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: hidx + 1,
            message: "bad p value in header".into(),
        })?;
    let mut rows = vec![Vec::new(); n_nodes];
    let mut seen = vec![false; n_nodes];
    for (idx, line) in lines {
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let mut toks = line.split(',');
        let id: usize = toks
            .next()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| err("bad node id".into()))?;
        if id >= n_nodes {
            return Err(err(format!("node id {id} out of range 0..{n_nodes}")));
        }
        if seen[id] {
            return Err(err(format!("duplicate node id {id}")));
        }
        let row = toks
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| err("bad H value".into()))?;
        if row.len() != p_grid.len() {
            return Err(err(format!(
                "row has {} values for {} p-grid points",
                row.len(),
                p_grid.len()
            )));
        }
        seen[id] = true;
        rows[id] = row;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("missing row for node {missing}"),
        });
    }
    Ok((p_grid, rows))
}
