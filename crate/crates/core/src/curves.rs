//! Admissible curves: paths on the graph with piecewise constant metric
//! derivative, the action integral along them, and the arc-length
//! reparametrization onto a unit-speed curve.
//!
//! A curve is a list of segments (duration, speed, traversed path); after
//! the last segment it stays put, so evaluation is defined for every
//! nonnegative time. The constant curve (one speed-0 segment) is always
//! admissible.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, GraphPath, GraphPoint, MetricGraph, GEOM_TOL};
use crate::hamiltonian::Lagrangian;

/// One constant-speed stretch of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub duration: f64,
    pub speed: f64,
    pub path: GraphPath,
}

/// A curve with piecewise constant metric derivative, constant after its
/// last breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleCurve {
    start: GraphPoint,
    segments: Vec<Segment>,
}

impl AdmissibleCurve {
    /// The constant curve at `x` (speed 0 for the whole horizon).
    pub fn constant(x: GraphPoint, horizon: f64) -> Self {
        let segments = if horizon > 0.0 {
            vec![Segment {
                duration: horizon,
                speed: 0.0,
                path: GraphPath::trivial(x),
            }]
        } else {
            Vec::new()
        };
        AdmissibleCurve { start: x, segments }
    }

    /// Validates continuity and the speed × duration = path length
    /// consistency of every segment.
    pub fn new(g: &MetricGraph, start: GraphPoint, segments: Vec<Segment>) -> Result<Self> {
        let mut cur = start;
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.duration > 0.0) || !seg.duration.is_finite() {
                return Err(Error::invalid_input(format!(
                    "segment {i} must have positive finite duration"
                )));
            }
            if seg.speed < 0.0 {
                return Err(Error::invalid_input(format!(
                    "segment {i} has negative speed"
                )));
            }
            if !g.same_location(seg.path.start, cur) {
                return Err(Error::invalid_input(format!(
                    "segment {i} does not start where the previous one ended"
                )));
            }
            let expected = seg.speed * seg.duration;
            if (seg.path.length() - expected).abs() > 1e-9 * (1.0 + expected) {
                return Err(Error::invalid_input(format!(
                    "segment {i}: path length {} != speed x duration {}",
                    seg.path.length(),
                    expected
                )));
            }
            cur = seg.path.end();
        }
        Ok(AdmissibleCurve { start, segments })
    }

    pub fn start(&self) -> GraphPoint {
        self.start
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Sum of segment durations (the last breakpoint).
    pub fn horizon(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn end(&self) -> GraphPoint {
        self.segments
            .last()
            .map(|s| s.path.end())
            .unwrap_or(self.start)
    }

    /// Position at time `h`; the curve is constant past its horizon.
    pub fn evaluate(&self, h: f64) -> GraphPoint {
        debug_assert!(h >= 0.0);
        let mut rem = h;
        for seg in &self.segments {
            if rem <= seg.duration {
                return seg.path.point_at(seg.speed * rem);
            }
            rem -= seg.duration;
        }
        self.end()
    }

    /// The metric derivative from the right, |ξ'|(h+0).
    pub fn speed_at(&self, h: f64) -> f64 {
        let mut rem = h;
        for seg in &self.segments {
            if rem < seg.duration - GEOM_TOL {
                return seg.speed;
            }
            rem -= seg.duration;
            if rem < 0.0 {
                rem = 0.0;
            }
        }
        0.0
    }

    /// The curve r ↦ ξ(r + h), used by the optimality principles.
    pub fn shift(&self, h: f64) -> AdmissibleCurve {
        let start = self.evaluate(h);
        let mut segments = Vec::new();
        let mut rem = h;
        for seg in &self.segments {
            if rem >= seg.duration {
                rem -= seg.duration;
                continue;
            }
            if rem > 0.0 {
                let from_arc = seg.speed * rem;
                segments.push(Segment {
                    duration: seg.duration - rem,
                    speed: seg.speed,
                    path: sub_path(&seg.path, from_arc),
                });
                rem = 0.0;
            } else {
                segments.push(seg.clone());
            }
        }
        AdmissibleCurve { start, segments }
    }

    /// ∫₀ʰ L(ξ(r), |ξ'|(r)) dr by composite midpoint quadrature with
    /// `n_quad` panels per segment; panels never straddle breakpoints.
    /// A single +∞ sample makes the whole action +∞.
    pub fn action(&self, lag: &Lagrangian, h: f64, n_quad: usize) -> f64 {
        debug_assert!(n_quad >= 1);
        if h <= 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        let mut t0 = 0.0;
        for seg in &self.segments {
            if t0 >= h {
                break;
            }
            let span = (h - t0).min(seg.duration);
            let w = span / n_quad as f64;
            for j in 0..n_quad {
                let m = (j as f64 + 0.5) * w;
                let x = seg.path.point_at(seg.speed * m);
                let l = lag.eval(x, seg.speed);
                if !l.is_finite() {
                    return f64::INFINITY;
                }
                total += w * l;
            }
            t0 += seg.duration;
        }
        if h > t0 {
            // Constant tail after the last breakpoint.
            let l = lag.eval(self.end(), 0.0);
            if !l.is_finite() {
                return f64::INFINITY;
            }
            total += (h - t0) * l;
        }
        total
    }

    /// Arc-length reparametrization: τ_ξ(h) = ∫₀ʰ|ξ'| and the unit-speed
    /// curve through the same trace, with ξ = ξ̂ ∘ τ_ξ.
    pub fn reparametrize(&self) -> ArcLengthProfile {
        let mut tau_breaks = vec![(0.0, 0.0)];
        let mut pieces = Vec::new();
        let (mut h, mut tau) = (0.0, 0.0);
        for seg in &self.segments {
            h += seg.duration;
            tau += seg.speed * seg.duration;
            tau_breaks.push((h, tau));
            pieces.extend(seg.path.pieces.iter().filter(|p| p.length() > 0.0).copied());
        }
        ArcLengthProfile {
            tau_breaks,
            unit_path: GraphPath {
                start: self.start,
                pieces,
            },
        }
    }

    /// Line-based text form: a `start` line, then one `seg` line per
    /// segment carrying duration, speed, and the traversed edge runs.
    pub fn to_text(&self) -> String {
        let mut out = format!("start {} {}\n", self.start.edge.0, self.start.offset);
        for seg in &self.segments {
            out.push_str(&format!("seg {} {}", seg.duration, seg.speed));
            for p in &seg.path.pieces {
                out.push_str(&format!(" {}:{}:{}", p.edge.0, p.from, p.to));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(g: &MetricGraph, text: &str) -> Result<AdmissibleCurve> {
        let mut start: Option<GraphPoint> = None;
        let mut segments = Vec::new();
        let mut prev_end: Option<GraphPoint> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut tok = line.split_whitespace();
            let bad = |msg: &str| Error::invalid_input(format!("curve line {}: {msg}", lineno + 1));
            match tok.next() {
                Some("start") => {
                    let edge: usize = tok
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("missing edge id"))?;
                    let offset: f64 = tok
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("missing offset"))?;
                    let p = GraphPoint::new(EdgeId(edge), offset);
                    start = Some(p);
                    prev_end = Some(p);
                }
                Some("seg") => {
                    let duration: f64 = tok
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("missing duration"))?;
                    let speed: f64 = tok
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("missing speed"))?;
                    let anchor = prev_end.ok_or_else(|| bad("seg before start"))?;
                    let mut path = GraphPath::trivial(anchor);
                    for piece in tok {
                        let parts: Vec<&str> = piece.split(':').collect();
                        if parts.len() != 3 {
                            return Err(bad("piece must be edge:from:to"));
                        }
                        let edge: usize =
                            parts[0].parse().map_err(|_| bad("bad piece edge id"))?;
                        let from: f64 = parts[1].parse().map_err(|_| bad("bad piece offset"))?;
                        let to: f64 = parts[2].parse().map_err(|_| bad("bad piece offset"))?;
                        path.pieces.push(crate::graph::PathPiece {
                            edge: EdgeId(edge),
                            from,
                            to,
                        });
                    }
                    if let Some(first) = path.pieces.first() {
                        path.start = GraphPoint::new(first.edge, first.from);
                    }
                    prev_end = Some(path.end());
                    segments.push(Segment {
                        duration,
                        speed,
                        path,
                    });
                }
                Some(other) => {
                    return Err(bad(&format!("unknown directive `{other}`")));
                }
                None => {}
            }
        }
        let start = start.ok_or_else(|| Error::invalid_input("curve text missing start line"))?;
        AdmissibleCurve::new(g, start, segments)
    }
}

fn sub_path(path: &GraphPath, from_arc: f64) -> GraphPath {
    let start = path.point_at(from_arc);
    let mut pieces = Vec::new();
    let mut acc = 0.0;
    for p in &path.pieces {
        let len = p.length();
        if acc + len <= from_arc + GEOM_TOL {
            acc += len;
            continue;
        }
        if acc < from_arc {
            let cut = from_arc - acc;
            let dir = if p.to >= p.from { 1.0 } else { -1.0 };
            pieces.push(crate::graph::PathPiece {
                edge: p.edge,
                from: p.from + dir * cut,
                to: p.to,
            });
        } else {
            pieces.push(*p);
        }
        acc += len;
    }
    GraphPath { start, pieces }
}

/// τ_ξ and the unit-speed curve ξ̂ of the arc-length reparametrization.
#[derive(Debug, Clone)]
pub struct ArcLengthProfile {
    /// Breakpoints (h, τ(h)); τ is piecewise linear and nondecreasing.
    pub tau_breaks: Vec<(f64, f64)>,
    unit_path: GraphPath,
}

impl ArcLengthProfile {
    /// τ_ξ(h): accumulated arc length at time h (constant past the end).
    pub fn tau(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        for w in self.tau_breaks.windows(2) {
            let ((h0, t0), (h1, t1)) = (w[0], w[1]);
            if h <= h1 {
                return t0 + (t1 - t0) * (h - h0) / (h1 - h0);
            }
        }
        self.total_length()
    }

    /// ξ̂(s): position at arc length s along the trace.
    pub fn unit_point(&self, s: f64) -> GraphPoint {
        self.unit_path.point_at(s)
    }

    pub fn unit_path(&self) -> &GraphPath {
        &self.unit_path
    }

    /// L⁺, the total arc length.
    pub fn total_length(&self) -> f64 {
        self.tau_breaks.last().map(|&(_, t)| t).unwrap_or(0.0)
    }
}

/// Deterministic family of admissible curves from `x`: element 0 is the
/// constant curve; the rest have 1–5 random segments with speeds uniform
/// in [0, v_cap] and random-walk directions.
pub fn sample_curves(
    g: &MetricGraph,
    x: GraphPoint,
    horizon: f64,
    v_cap: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<AdmissibleCurve>> {
    if n == 0 {
        return Err(Error::invalid_input("need at least one curve"));
    }
    if v_cap < 0.0 || horizon <= 0.0 {
        return Err(Error::invalid_input("need v_cap >= 0 and horizon > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    out.push(AdmissibleCurve::constant(x, horizon));
    for _ in 1..n {
        let k = rng.gen_range(1..=5usize);
        let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(0.0..horizon)).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.insert(0, 0.0);
        cuts.push(horizon);
        let mut cur = x;
        let mut segments = Vec::with_capacity(k);
        for w in cuts.windows(2) {
            let duration = w[1] - w[0];
            if duration <= GEOM_TOL {
                continue;
            }
            let mut speed = if v_cap > 0.0 {
                rng.gen_range(0.0..=v_cap)
            } else {
                0.0
            };
            if speed * duration <= GEOM_TOL {
                speed = 0.0;
            }
            let path = if speed == 0.0 {
                GraphPath::trivial(cur)
            } else {
                g.walk_random(cur, speed * duration, &mut rng)
            };
            cur = path.end();
            segments.push(Segment {
                duration,
                speed,
                path,
            });
        }
        out.push(AdmissibleCurve::new(g, x, segments)?);
    }
    Ok(out)
}
