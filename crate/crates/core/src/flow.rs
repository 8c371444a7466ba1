//! Flow lines of `e^{i(h/chi + theta)}` traced from interior points.
//!
//! Tracing is 4th-order Runge-Kutta at fixed arclength step on the
//! piecewise-linear field.  When the grid carries a conical singularity the
//! principal-branch jump of the arg term across `(-inf,0)+z0` is compensated
//! along the trajectory, so the heading field seen by the tracer is
//! continuous.  Merging is a discretization rule: a running tip that comes
//! within tolerance of a same-angle line with aligned heading and zero local
//! height difference snaps onto it and copies the target's tail, so merged
//! paths agree from the merge point on.

use crate::gff::FieldGrid;
use crate::params::Constants;
use crate::{Error, Point, Result};
use std::collections::HashMap;
use std::f64::consts::PI;

/// Options for a single trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceOpts {
    /// Arclength per step, in window units.
    pub step: f64,
    pub max_steps: usize,
    /// Snap distance for merging; `1.5 * step` is the calibrated default.
    pub merge_tol: f64,
}

impl TraceOpts {
    pub fn new(step: f64, max_steps: usize) -> Self {
        Self {
            step,
            max_steps,
            merge_tol: 1.5 * step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    /// Merged into `target` at the target's arc index.
    Merged { target: usize, arc: usize },
    ExitedWindow,
    MaxSteps,
}

/// Side of a directed polyline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone)]
pub struct FlowLine {
    pub id: usize,
    pub start: Point,
    pub theta: f64,
    pub points: Vec<Point>,
    /// Cumulative signed turning (radians) per point; turning[0] = 0.
    pub turning: Vec<f64>,
    pub status: Status,
    pub step: f64,
    /// Number of points traced before any merge-copied tail.
    pub own_len: usize,
}

impl FlowLine {
    /// Unit direction of the segment leaving point `idx` (or entering, at the
    /// last point).
    pub fn direction(&self, idx: usize) -> Point {
        let (a, b) = if idx + 1 < self.points.len() {
            (self.points[idx], self.points[idx + 1])
        } else {
            (self.points[idx - 1], self.points[idx])
        };
        let d = b - a;
        d / d.norm()
    }
}

/// Result of the merge rule firing.
#[derive(Debug, Clone, Copy)]
pub struct MergeEvent {
    pub target: usize,
    /// Arc index on the target polyline where the tip snapped.
    pub arc: usize,
    pub at: Point,
    /// Side of the target's directed polyline the tip approached from.
    pub side: Side,
}

#[derive(Debug, Clone, Copy)]
pub struct MergeEdge {
    pub child: usize,
    pub parent: usize,
    pub at: Point,
    pub arc: usize,
    pub side: Side,
}

/// Forest of flow lines with shared merge state.
#[derive(Debug, Clone)]
pub struct Forest {
    pub lines: Vec<FlowLine>,
    pub merge_edges: Vec<MergeEdge>,
    uf: Vec<usize>,
    index: SpatialIndex,
    theta: f64,
}

impl Forest {
    pub fn new(theta: f64, cell: f64) -> Self {
        Self {
            lines: Vec::new(),
            merge_edges: Vec::new(),
            uf: Vec::new(),
            index: SpatialIndex::new(cell),
            theta,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn find(&self, mut i: usize) -> usize {
        while self.uf[i] != i {
            i = self.uf[i];
        }
        i
    }

    pub fn same_component(&self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    /// Number of distinct components among the given line ids.
    pub fn component_count(&self, ids: &[usize]) -> usize {
        let mut roots: Vec<usize> = ids.iter().map(|&i| self.find(i)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    /// Parent edge of a line, if it merged.
    pub fn parent_of(&self, id: usize) -> Option<&MergeEdge> {
        self.merge_edges.iter().find(|e| e.child == id)
    }

    fn push_line(&mut self, line: FlowLine, merge: Option<MergeEvent>) {
        let id = line.id;
        self.uf.push(id);
        // index only the line's own points; merge-copied tails are already
        // indexed under their owner
        for (k, p) in line.points.iter().take(line.own_len).enumerate() {
            self.index.insert(*p, (id, k));
        }
        if let Some(ev) = merge {
            self.merge_edges.push(MergeEdge {
                child: id,
                parent: ev.target,
                at: ev.at,
                arc: ev.arc,
                side: ev.side,
            });
            let (ra, rb) = (self.find(id), self.find(ev.target));
            if ra != rb {
                self.uf[ra] = rb;
            }
        }
        self.lines.push(line);
    }
}

/// Grid-bucket index over polyline points.
#[derive(Debug, Clone)]
struct SpatialIndex {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<(Point, (usize, usize))>>,
}

impl SpatialIndex {
    fn new(cell: f64) -> Self {
        Self {
            cell,
            buckets: HashMap::new(),
        }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p.re / self.cell).floor() as i64, (p.im / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: Point, tag: (usize, usize)) {
        self.buckets.entry(self.key(p)).or_default().push((p, tag));
    }

    /// All stored points within `r` of `p`.
    fn near(&self, p: Point, r: f64) -> impl Iterator<Item = (Point, (usize, usize))> + '_ {
        let (kx, ky) = self.key(p);
        let reach = (r / self.cell).ceil() as i64;
        (-reach..=reach)
            .flat_map(move |dx| (-reach..=reach).map(move |dy| (kx + dx, ky + dy)))
            .filter_map(move |k| self.buckets.get(&k))
            .flatten()
            .filter(move |(q, _)| (p - q).norm() <= r)
            .copied()
    }
}

/// Continuous-branch field evaluation context for a trajectory.
struct HeadingField<'a> {
    grid: &'a FieldGrid,
    chi: f64,
    theta: f64,
    /// Current branch offset k: continuous arg = principal arg + 2 pi k.
    cut_k: i32,
}

impl HeadingField<'_> {
    /// Heading direction at `q`, unwrapping the cut relative to base point
    /// `base` (which carries offset `self.cut_k`).
    fn dir(&self, base: Point, q: Point) -> Result<Point> {
        let mut value = self.grid.eval(q)?;
        if let Some(s) = self.grid.singularity {
            let k = self.cut_k + s.cut_jump(base, q);
            value -= s.alpha * 2.0 * PI * k as f64;
        }
        let heading = value / self.chi + self.theta;
        Ok(Point::from_polar(1.0, heading))
    }

    fn advance(&mut self, from: Point, to: Point) {
        if let Some(s) = self.grid.singularity {
            self.cut_k += s.cut_jump(from, to);
        }
    }
}

/// Number of trailing steps inspected for the stall check.
const STALL_WINDOW: usize = 12;

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Trace a single flow line (no merging).
pub fn trace_flow_line(
    grid: &FieldGrid,
    c: &Constants,
    z0: Point,
    theta: f64,
    opts: &TraceOpts,
) -> Result<FlowLine> {
    trace_line_inner(grid, c, 0, z0, theta, opts, None).map(|(l, _)| l)
}

/// Check the running tip of `line` against the forest: fires when the tip is
/// within `tol` of a same-angle line with heading gap below pi/4 and zero
/// local height difference under the |D|-minimizing winding.
pub fn merge_rule(
    tip: Point,
    tip_dir: Point,
    tip_turning: f64,
    own_id: usize,
    forest: &Forest,
    chi: f64,
    tol: f64,
) -> Option<MergeEvent> {
    let mut best: Option<(f64, MergeEvent)> = None;
    for (p, (lid, arc)) in forest.index.near(tip, tol) {
        if lid == own_id {
            continue;
        }
        let target = &forest.lines[lid];
        if target.points.len() < 2 {
            continue;
        }
        let tdir = target.direction(arc.min(target.points.len() - 1));
        let gap = wrap_angle(
            tip_dir.im.atan2(tip_dir.re) - tdir.im.atan2(tdir.re),
        )
        .abs();
        if gap >= PI / 4.0 {
            continue;
        }
        // local height difference for equal angles: D = 2 pi k chi with k
        // from relative turning; merging needs D = 0, i.e. k = 0
        let k = ((target.turning[arc.min(target.turning.len() - 1)] - tip_turning)
            / (2.0 * PI))
            .round();
        if k != 0.0 && (2.0 * PI * k * chi).abs() > 1e-9 {
            continue;
        }
        let dist = (p - tip).norm();
        let ev = MergeEvent {
            target: lid,
            arc,
            at: p,
            side: approach_side(tdir, tip - p - tip_dir * 1e-9, tip_dir),
        };
        if best.as_ref().map_or(true, |(bd, _)| dist < *bd) {
            best = Some((dist, ev));
        }
    }
    best.map(|(_, ev)| ev)
}

/// Side of the directed target tangent the tip approaches from, judged by
/// the tip's offset from the snap point (falling back to the heading cross
/// product when the offset is degenerate).
fn approach_side(target_dir: Point, offset: Point, tip_dir: Point) -> Side {
    let mut cross = target_dir.re * offset.im - target_dir.im * offset.re;
    if cross.abs() < 1e-12 {
        cross = target_dir.re * tip_dir.im - target_dir.im * tip_dir.re;
    }
    if cross < 0.0 {
        Side::Right
    } else {
        Side::Left
    }
}

fn trace_line_inner(
    grid: &FieldGrid,
    c: &Constants,
    id: usize,
    z0: Point,
    theta: f64,
    opts: &TraceOpts,
    forest: Option<&Forest>,
) -> Result<(FlowLine, Option<MergeEvent>)> {
    if opts.step <= 0.0 {
        return Err(Error::Option(format!("step = {} <= 0", opts.step)));
    }
    if let Some(s) = grid.singularity {
        if (z0 - s.center).norm() < 1e-12 {
            return Err(Error::StartPoint("start at singularity center".into()));
        }
    }
    if !grid.window.contains(z0) {
        return Err(Error::StartPoint(format!(
            "start ({}, {}) outside window",
            z0.re, z0.im
        )));
    }

    let mut field = HeadingField {
        grid,
        chi: c.chi,
        theta,
        cut_k: 0,
    };
    let mut line = FlowLine {
        id,
        start: z0,
        theta,
        points: vec![z0],
        turning: vec![0.0],
        status: Status::Running,
        step: opts.step,
        own_len: 1,
    };
    let mut prev_dir: Option<Point> = None;
    let mut merge: Option<MergeEvent> = None;

    // a fresh tip can already lie on an existing line (duplicate start)
    if let Some(f) = forest {
        if let Ok(d0) = field.dir(z0, z0) {
            if let Some(ev) = merge_rule(z0, d0, 0.0, id, f, c.chi, opts.merge_tol) {
                merge = Some(ev);
            }
        }
    }

    while merge.is_none() && line.points.len() <= opts.max_steps {
        let z = *line.points.last().unwrap();
        let h = opts.step;
        let k1 = match field.dir(z, z) {
            Ok(d) => d,
            Err(_) => {
                line.status = Status::ExitedWindow;
                break;
            }
        };
        let eval = |f: &HeadingField, q: Point| f.dir(z, q);
        let k2 = eval(&field, z + k1 * (h / 2.0));
        let k3 = k2.as_ref().ok().map(|k2| z + *k2 * (h / 2.0));
        let (k2, k3, k4) = match (k2, k3) {
            (Ok(k2), Some(z3)) => match (eval(&field, z3), ()) {
                (Ok(k3), ()) => match eval(&field, z + k3 * h) {
                    Ok(k4) => (k2, k3, k4),
                    Err(_) => {
                        line.status = Status::ExitedWindow;
                        break;
                    }
                },
                (Err(_), ()) => {
                    line.status = Status::ExitedWindow;
                    break;
                }
            },
            _ => {
                line.status = Status::ExitedWindow;
                break;
            }
        };
        let inc = (k1 + k2 * 2.0 + k3 * 2.0 + k4) / 6.0;
        let inc = inc / inc.norm() * h; // unit-speed: consecutive points step apart
        let z_new = z + inc;
        if !grid.window.contains(z_new) {
            line.status = Status::ExitedWindow;
            break;
        }
        field.advance(z, z_new);
        let dturn = match prev_dir {
            Some(pd) => wrap_angle(inc.im.atan2(inc.re) - pd.im.atan2(pd.re)),
            None => 0.0,
        };
        prev_dir = Some(inc);
        let turn = line.turning.last().unwrap() + dturn;
        line.points.push(z_new);
        line.turning.push(turn);
        line.own_len = line.points.len();

        // a tip caught in a sub-cell oscillation (the heading field reverses
        // across a cell and the fixed step overshoots the turn) makes no
        // further progress; stop it instead of burning the step budget
        if line.points.len() >= STALL_WINDOW
            && (z_new - line.points[line.points.len() - STALL_WINDOW]).norm() < opts.step
        {
            line.status = Status::MaxSteps;
            break;
        }

        if let Some(f) = forest {
            let dir = inc / inc.norm();
            if let Some(ev) = merge_rule(z_new, dir, turn, id, f, c.chi, opts.merge_tol) {
                merge = Some(ev);
            }
        }
    }

    if let Some(ev) = merge.as_mut() {
        // the offset at the merge instant is sub-tolerance and noisy; vote
        // over the recent approach history instead
        let target = &forest.unwrap().lines[ev.target];
        if line.own_len >= 3 {
            let a0 = ev.arc.saturating_sub(100);
            let a1 = (ev.arc + 100).min(target.points.len() - 1);
            let mut score = 0.0;
            for back in 1..=line.own_len.min(20) {
                let cp = line.points[line.own_len - back];
                let mut bd = f64::INFINITY;
                let mut bj = ev.arc;
                for j in a0..=a1 {
                    let d = (target.points[j] - cp).norm();
                    if d < bd {
                        bd = d;
                        bj = j;
                    }
                }
                let td = target.direction(bj);
                let off = cp - target.points[bj];
                score += td.re * off.im - td.im * off.re;
            }
            if score.abs() > 1e-12 {
                ev.side = if score < 0.0 { Side::Right } else { Side::Left };
            }
        }
    }
    if let Some(ev) = merge {
        line.status = Status::Merged {
            target: ev.target,
            arc: ev.arc,
        };
        // snap and copy the target's tail so paths agree after merging
        let target = &forest.unwrap().lines[ev.target];
        let tail_turn = *line.turning.last().unwrap();
        let base_turn = target.turning[ev.arc];
        line.points.push(ev.at);
        line.turning.push(tail_turn);
        for k in ev.arc + 1..target.points.len() {
            line.points.push(target.points[k]);
            line.turning
                .push(tail_turn + (target.turning[k] - base_turn));
        }
    } else if line.status == Status::Running {
        line.status = Status::MaxSteps;
    }
    Ok((line, merge))
}

/// Trace flow lines from all starts (in id order) with shared merge state.
pub fn build_forest(
    grid: &FieldGrid,
    c: &Constants,
    starts: &[Point],
    theta: f64,
    opts: &TraceOpts,
) -> Result<Forest> {
    for (i, a) in starts.iter().enumerate() {
        for b in &starts[..i] {
            if (a - b).norm() == 0.0 {
                return Err(Error::Input(format!("duplicate start ({}, {})", a.re, a.im)));
            }
        }
    }
    let mut forest = Forest::new(theta, opts.merge_tol.max(opts.step));
    for (id, &z0) in starts.iter().enumerate() {
        let (line, merge) = trace_line_inner(grid, c, id, z0, theta, opts, Some(&forest))?;
        forest.push_line(line, merge);
    }
    Ok(forest)
}

/// Height difference between two flow lines at a near-hit.
#[derive(Debug, Clone, Copy)]
pub struct HeightDifference {
    pub value: f64,
    pub winding: i64,
    pub side: Side,
}

/// `D = (2 pi k + theta_b - theta_a) * chi` with `k` read off the relative
/// cumulative turning at the hit.
pub fn height_difference_at_hit(
    a: &FlowLine,
    b: &FlowLine,
    hit: (usize, usize),
    c: &Constants,
    tol: f64,
) -> Result<HeightDifference> {
    let (ia, ib) = hit;
    if ia >= a.points.len() || ib >= b.points.len() {
        return Err(Error::InvalidHit);
    }
    if (a.points[ia] - b.points[ib]).norm() > tol {
        return Err(Error::InvalidHit);
    }
    let k = ((b.turning[ib] - a.turning[ia]) / (2.0 * PI)).round() as i64;
    let d = (2.0 * PI * k as f64 + b.theta - a.theta) * c.chi;
    let da = a.direction(ia);
    let db = b.direction(ib);
    let cross = da.re * db.im - da.im * db.re;
    let side = if cross < 0.0 { Side::Right } else { Side::Left };
    Ok(HeightDifference {
        value: d,
        winding: k,
        side,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interaction {
    Crosses,
    Merges,
    Bounces,
    CannotHit,
}

/// Classification by height difference: on the right side, crosses for
/// `D in (-pi chi, 0)`, merges at `D = 0`, bounces for `D in (0, 2 lambda - pi chi)`.
/// The left side mirrors with `-D`.
pub fn classify_interaction(d: &HeightDifference, c: &Constants) -> Interaction {
    let v = match d.side {
        Side::Right => d.value,
        Side::Left => -d.value,
    };
    let hi = 2.0 * c.lambda - PI * c.chi;
    if v.abs() <= 1e-9 {
        Interaction::Merges
    } else if v > -PI * c.chi && v < 0.0 {
        Interaction::Crosses
    } else if v > 0.0 && v < hi {
        Interaction::Bounces
    } else {
        Interaction::CannotHit
    }
}

/// Smallest-|D| height difference over winding offsets in `-k_range..=k_range`
/// (selection rule for contacts where the polyline turning is ambiguous).
pub fn minimal_height_difference(
    theta_a: f64,
    theta_b: f64,
    c: &Constants,
    k_range: i64,
) -> HeightDifference {
    let mut best = HeightDifference {
        value: f64::INFINITY,
        winding: 0,
        side: Side::Right,
    };
    for k in -k_range..=k_range {
        let d = (2.0 * PI * k as f64 + theta_b - theta_a) * c.chi;
        if d.abs() < best.value.abs() {
            best = HeightDifference {
                value: d,
                winding: k,
                side: Side::Right,
            };
        }
    }
    best
}

/// A classified near-hit of a running tip against a finished target line.
#[derive(Debug, Clone, Copy)]
pub struct ContactEvent {
    pub kind: Interaction,
    pub at: Point,
    /// Index on the traced line at the moment of contact.
    pub arc_self: usize,
    /// Nearest arc index on the target.
    pub arc_target: usize,
    pub d: HeightDifference,
}

/// Trace a flow line while enforcing its classified interaction with a fixed
/// target line: crossing passes through (once, after which the mirrored rule
/// turns further hits into bounces), bouncing slides along the target without
/// changing side, and `cannot_hit` contacts are steered away.  The winding
/// count entering the height difference is the number of full loops the tip
/// has made around the target's start point.
pub fn trace_with_target(
    grid: &FieldGrid,
    c: &Constants,
    z0: Point,
    theta: f64,
    opts: &TraceOpts,
    target: &FlowLine,
    tol: f64,
) -> Result<(FlowLine, Vec<ContactEvent>)> {
    if opts.step <= 0.0 {
        return Err(Error::Option(format!("step = {} <= 0", opts.step)));
    }
    if !grid.window.contains(z0) {
        return Err(Error::StartPoint(format!(
            "start ({}, {}) outside window",
            z0.re, z0.im
        )));
    }
    // a smoothed copy of the target stabilizes the slide directions; the
    // lattice-scale wiggles of the raw polyline flip the local tangent
    let smooth_target = smooth_polyline(&target.points, 7);
    let mut index = SpatialIndex::new(tol.max(opts.step));
    for (k, p) in smooth_target.iter().enumerate() {
        index.insert(*p, (target.id, k));
    }
    let target_dir = |arc: usize| -> Point {
        let (i, j) = if arc + 1 < smooth_target.len() {
            (arc, arc + 1)
        } else {
            (arc - 1, arc)
        };
        let d = smooth_target[j] - smooth_target[i];
        if d.norm() > 1e-12 {
            d / d.norm()
        } else {
            Point::new(1.0, 0.0)
        }
    };
    let mut field = HeadingField {
        grid,
        chi: c.chi,
        theta,
        cut_k: 0,
    };
    let mut line = FlowLine {
        id: target.id + 1,
        start: z0,
        theta,
        points: vec![z0],
        turning: vec![0.0],
        status: Status::Running,
        step: opts.step,
        own_len: 1,
    };
    let mut events: Vec<ContactEvent> = Vec::new();
    let mut prev_dir: Option<Point> = None;
    // accumulated angle of the tip as seen from the target's start
    let mut wind = 0.0f64;
    // the classification of the contact episode in progress, if any, with
    // the slide orientation chosen at the start of the episode
    let mut episode: Option<(Interaction, f64)> = None;

    while line.points.len() <= opts.max_steps {
        let z = *line.points.last().unwrap();
        let h = opts.step;
        let dir_at = |f: &HeadingField, q: Point| f.dir(z, q);
        let k1 = match dir_at(&field, z) {
            Ok(d) => d,
            Err(_) => {
                line.status = Status::ExitedWindow;
                break;
            }
        };
        let inc = (|| -> Result<Point> {
            let k2 = dir_at(&field, z + k1 * (h / 2.0))?;
            let k3 = dir_at(&field, z + k2 * (h / 2.0))?;
            let k4 = dir_at(&field, z + k3 * h)?;
            Ok((k1 + k2 * 2.0 + k3 * 2.0 + k4) / 6.0)
        })();
        let inc = match inc {
            Ok(v) if v.norm() > 1e-12 => v / v.norm() * h,
            _ => {
                line.status = Status::ExitedWindow;
                break;
            }
        };
        let mut step_inc = inc;

        // contact rule against the target
        let near = index
            .near(z + inc, tol)
            .min_by(|a, b| (a.0 - z - inc).norm().total_cmp(&(b.0 - z - inc).norm()));
        if let Some((p, (_, arc))) = near {
            let td = target_dir(arc);
            let (kind, along_sign) = match episode {
                Some(ks) => ks,
                None => {
                    let k_wind = (wind / (2.0 * PI)).round();
                    let value = (2.0 * PI * k_wind + theta - target.theta) * c.chi;
                    let mut cross = td.re * (z - p).im - td.im * (z - p).re;
                    if cross.abs() < 1e-12 {
                        cross = td.re * inc.im - td.im * inc.re;
                    }
                    let side = if cross < 0.0 { Side::Right } else { Side::Left };
                    let d = HeightDifference {
                        value,
                        winding: k_wind as i64,
                        side,
                    };
                    let kind = classify_interaction(&d, c);
                    events.push(ContactEvent {
                        kind,
                        at: p,
                        arc_self: line.points.len() - 1,
                        arc_target: arc,
                        d,
                    });
                    let along_sign = if inc.re * td.re + inc.im * td.im >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    };
                    (kind, along_sign)
                }
            };
            episode = Some((kind, along_sign));
            let away = {
                let off = z - p;
                if off.norm() > 1e-12 {
                    off / off.norm()
                } else {
                    let s = td.re * inc.im - td.im * inc.re;
                    let n = Point::new(-td.im, td.re);
                    if s < 0.0 {
                        -n
                    } else {
                        n
                    }
                }
            };
            match kind {
                Interaction::Merges => {
                    line.points.push(p);
                    line.turning.push(*line.turning.last().unwrap());
                    line.own_len = line.points.len();
                    line.status = Status::Merged {
                        target: target.id,
                        arc,
                    };
                    break;
                }
                Interaction::Crosses => {
                    // pass through unchanged; the side flip after the
                    // crossing mirrors the rule so later hits bounce
                }
                Interaction::Bounces => {
                    // slide along the target without changing side
                    let v = td * along_sign + away * 0.3;
                    step_inc = v / v.norm() * h;
                }
                Interaction::CannotHit => {
                    // deflect around the target: slide with a firm outward
                    // push so the tip is carried past without touching
                    let v = td * along_sign + away;
                    step_inc = v / v.norm() * h;
                }
            }
        } else if episode.is_some() {
            // episode ends once the tip leaves the doubled tolerance
            let still_near = index.near(z + step_inc, 2.0 * tol).next().is_some();
            if !still_near {
                episode = None;
            }
        }

        let z_new = z + step_inc;
        if !grid.window.contains(z_new) {
            line.status = Status::ExitedWindow;
            break;
        }
        field.advance(z, z_new);
        wind += wrap_angle((z_new - target.start).arg() - (z - target.start).arg());
        let dturn = match prev_dir {
            Some(pd) => wrap_angle(step_inc.im.atan2(step_inc.re) - pd.im.atan2(pd.re)),
            None => 0.0,
        };
        prev_dir = Some(step_inc);
        let turn = line.turning.last().unwrap() + dturn;
        line.points.push(z_new);
        line.turning.push(turn);
        line.own_len = line.points.len();
        if line.points.len() >= STALL_WINDOW
            && (z_new - line.points[line.points.len() - STALL_WINDOW]).norm() < opts.step
        {
            line.status = Status::MaxSteps;
            break;
        }
    }
    if line.status == Status::Running {
        line.status = Status::MaxSteps;
    }
    Ok((line, events))
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re)
}

fn proper_crossing(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Number of transversal crossings of `b` over `a` (tangential contacts
/// without a side change do not count).
pub fn count_crossings(a: &FlowLine, b: &FlowLine, _tol: f64) -> usize {
    count_polyline_crossings(&a.points, &b.points)
}

pub fn count_polyline_crossings(a: &[Point], b: &[Point]) -> usize {
    if a.len() < 2 || b.len() < 2 {
        return 0;
    }
    // bucket a's segments by cell
    let mut max_len = 0.0f64;
    for w in a.windows(2) {
        max_len = max_len.max((w[1] - w[0]).norm());
    }
    for w in b.windows(2) {
        max_len = max_len.max((w[1] - w[0]).norm());
    }
    let cell = (2.0 * max_len).max(1e-9);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let key = |p: Point| ((p.re / cell).floor() as i64, (p.im / cell).floor() as i64);
    for (i, w) in a.windows(2).enumerate() {
        let (k1, k2) = (key(w[0]), key(w[1]));
        for kx in k1.0.min(k2.0)..=k1.0.max(k2.0) {
            for ky in k1.1.min(k2.1)..=k1.1.max(k2.1) {
                buckets.entry((kx, ky)).or_default().push(i);
            }
        }
    }
    let mut count = 0;
    let mut seen: Vec<usize> = Vec::new();
    for w in b.windows(2) {
        seen.clear();
        let (k1, k2) = (key(w[0]), key(w[1]));
        for kx in k1.0.min(k2.0) - 1..=k1.0.max(k2.0) + 1 {
            for ky in k1.1.min(k2.1) - 1..=k1.1.max(k2.1) + 1 {
                if let Some(list) = buckets.get(&(kx, ky)) {
                    for &i in list {
                        if seen.contains(&i) {
                            continue;
                        }
                        seen.push(i);
                        if proper_crossing(a[i], a[i + 1], w[0], w[1]) {
                            count += 1;
                        }
                    }
                }
            }
        }
    }
    count
}

/// Centered moving average; suppresses lattice-scale heading noise before
/// geometric queries.  Endpoints use shrunken windows.
pub fn smooth_polyline(pts: &[Point], window: usize) -> Vec<Point> {
    if window <= 1 || pts.len() <= 2 {
        return pts.to_vec();
    }
    let half = window / 2;
    let n = pts.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let sum: Point = pts[lo..=hi].iter().sum();
            sum / (hi - lo + 1) as f64
        })
        .collect()
}

/// Transversal crossings of `b` over `a` clustered into events: crossings
/// whose segment indices on both lines are within `min_sep` belong to one
/// geometric crossing (discrete lines can flicker across each other near a
/// genuine crossing point).
pub fn count_crossing_events(a: &[Point], b: &[Point], min_sep: usize) -> usize {
    if a.len() < 2 || b.len() < 2 {
        return 0;
    }
    let mut max_len = 0.0f64;
    for w in a.windows(2).chain(b.windows(2)) {
        max_len = max_len.max((w[1] - w[0]).norm());
    }
    let cell = (2.0 * max_len).max(1e-9);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let key = |p: Point| ((p.re / cell).floor() as i64, (p.im / cell).floor() as i64);
    for (i, w) in a.windows(2).enumerate() {
        let (k1, k2) = (key(w[0]), key(w[1]));
        for kx in k1.0.min(k2.0)..=k1.0.max(k2.0) {
            for ky in k1.1.min(k2.1)..=k1.1.max(k2.1) {
                buckets.entry((kx, ky)).or_default().push(i);
            }
        }
    }
    let mut hits: Vec<(usize, usize)> = Vec::new();
    let mut seen: Vec<usize> = Vec::new();
    for (j, w) in b.windows(2).enumerate() {
        seen.clear();
        let (k1, k2) = (key(w[0]), key(w[1]));
        for kx in k1.0.min(k2.0) - 1..=k1.0.max(k2.0) + 1 {
            for ky in k1.1.min(k2.1) - 1..=k1.1.max(k2.1) + 1 {
                if let Some(list) = buckets.get(&(kx, ky)) {
                    for &i in list {
                        if seen.contains(&i) {
                            continue;
                        }
                        seen.push(i);
                        if proper_crossing(a[i], a[i + 1], w[0], w[1]) {
                            hits.push((i, j));
                        }
                    }
                }
            }
        }
    }
    hits.sort_unstable();
    // single-linkage clustering on the index pairs
    let mut events = 0usize;
    let mut cluster: Vec<(usize, usize)> = Vec::new();
    for h in hits {
        let joined = cluster
            .iter()
            .any(|&(ci, cj)| ci.abs_diff(h.0) <= min_sep && cj.abs_diff(h.1) <= min_sep);
        if cluster.is_empty() || joined {
            cluster.push(h);
        } else {
            events += 1;
            cluster.clear();
            cluster.push(h);
        }
    }
    if !cluster.is_empty() {
        events += 1;
    }
    events
}

/// Minimum distance between two polylines, vertex-to-segment both ways.
pub fn polyline_distance(a: &[Point], b: &[Point]) -> f64 {
    fn point_seg(p: Point, s0: Point, s1: Point) -> f64 {
        let d = s1 - s0;
        let len2 = d.norm_sqr();
        if len2 == 0.0 {
            return (p - s0).norm();
        }
        let t = (((p - s0).re * d.re + (p - s0).im * d.im) / len2).clamp(0.0, 1.0);
        (p - (s0 + d * t)).norm()
    }
    let mut best = f64::INFINITY;
    for p in a {
        for w in b.windows(2) {
            best = best.min(point_seg(*p, w[0], w[1]));
        }
    }
    for p in b {
        for w in a.windows(2) {
            best = best.min(point_seg(*p, w[0], w[1]));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gff::{sample_zero_boundary, FieldGrid, Window};
    use crate::params::derive_constants;

    fn constant_field(n: usize, value: f64) -> FieldGrid {
        let half = 0.5 * (n - 1) as f64;
        FieldGrid {
            n,
            spacing: 1.0,
            values: vec![value; n * n],
            window: Window {
                x0: -half,
                y0: -half,
                x1: half,
                y1: half,
            },
            singularity: None,
            seed: 0,
        }
    }

    #[test]
    fn constant_field_gives_straight_ray() {
        let c = derive_constants(2.0).unwrap();
        let value = 0.9;
        let grid = constant_field(41, value);
        let opts = TraceOpts::new(0.05, 400);
        let line = trace_flow_line(&grid, &c, Point::new(0.0, 0.0), 0.3, &opts).unwrap();
        let heading = value / c.chi + 0.3;
        let dir = Point::from_polar(1.0, heading);
        // endpoint error below 1e-9 per unit length
        let len = (line.points.len() - 1) as f64 * opts.step;
        let expect = dir * len;
        let err = (*line.points.last().unwrap() - expect).norm();
        assert!(err < 1e-9 * len.max(1.0), "err = {err}");
        // consecutive points exactly step apart
        for w in line.points.windows(2) {
            assert!(((w[1] - w[0]).norm() - opts.step).abs() < 1e-12);
        }
        assert_eq!(line.turning[0], 0.0);
    }

    #[test]
    fn arg_field_gives_log_spiral() {
        // h = a * arg(z): heading = a*arg(z)/chi + theta. For a = chi the
        // smooth ODE solution through z0 = r0 e^{i phi0} with theta = pi/2
        // is the circle of radius r0 (heading always perpendicular to the
        // radius vector).
        let c = derive_constants(2.0).unwrap();
        let n = 201;
        let mut grid = constant_field(n, 0.0);
        for j in 0..n {
            for i in 0..n {
                let v = grid.vertex(i, j);
                grid.values[j * n + i] = c.chi * v.im.atan2(v.re);
            }
        }
        grid.singularity = Some(crate::gff::Singularity {
            center: Point::new(0.0, 0.0),
            alpha: -c.chi,
            beta: 0.0,
        });
        let opts = TraceOpts::new(0.02, 1500);
        let r0 = 30.0;
        let line =
            trace_flow_line(&grid, &c, Point::new(r0, 0.0), std::f64::consts::FRAC_PI_2, &opts)
                .unwrap();
        // stays on the circle |z| = r0 to within discretization error
        let total_len = (line.points.len() - 1) as f64 * opts.step;
        for p in &line.points {
            assert!((p.norm() - r0).abs() < 1e-5 * total_len.max(1.0), "|p| = {}", p.norm());
        }
    }

    #[test]
    fn periodicity_and_angle_shift() {
        let c = derive_constants(4.0 / 3.0).unwrap();
        let grid = sample_zero_boundary(64, 0.25, 11).unwrap().scaled(1.0);
        let opts = TraceOpts::new(0.05, 300);
        let z0 = Point::new(0.3, -0.2);
        let base = trace_flow_line(&grid, &c, z0, 0.7, &opts).unwrap();
        // adding 2 pi chi to the field leaves the trace unchanged (up to
        // floating-point rounding in the shifted evaluation)
        let shifted = grid.shifted(2.0 * PI * c.chi);
        let same = trace_flow_line(&shifted, &c, z0, 0.7, &opts).unwrap();
        assert_eq!(base.points.len(), same.points.len());
        for (p, q) in base.points.iter().zip(&same.points) {
            assert!((p - q).norm() < 1e-9, "{p} vs {q}");
        }
        // theta shift delta equals field shift delta * chi
        let delta = 0.4;
        let a = trace_flow_line(&grid, &c, z0, 0.7 + delta, &opts).unwrap();
        let b = trace_flow_line(&grid.shifted(delta * c.chi), &c, z0, 0.7, &opts).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((p - q).norm() < 1e-9);
        }
    }

    #[test]
    fn rk4_order_on_smooth_field() {
        // halving the step changes the endpoint by O(step^4); compare
        // against the spiral field's exact circular orbit
        let c = derive_constants(2.0).unwrap();
        let n = 201;
        let mut grid = constant_field(n, 0.0);
        for j in 0..n {
            for i in 0..n {
                let v = grid.vertex(i, j);
                // smooth linear field: heading varies linearly
                grid.values[j * n + i] = 0.05 * c.chi * v.re;
            }
        }
        let z0 = Point::new(-20.0, -20.0);
        let run = |step: f64| {
            let opts = TraceOpts::new(step, (8.0 / step) as usize);
            let line = trace_flow_line(&grid, &c, z0, 0.2, &opts).unwrap();
            line.points[(4.0 / step) as usize]
        };
        let coarse = run(0.2);
        let mid = run(0.1);
        let fine = run(0.05);
        let e1 = (coarse - fine).norm();
        let e2 = (mid - fine).norm();
        // PL interpolation limits exact 4th order; expect at least ~2x gain
        assert!(e2 < e1 * 0.6 + 1e-12, "e1 = {e1}, e2 = {e2}");
    }

    #[test]
    fn merge_same_start_and_forest_shapes() {
        let c = derive_constants(4.0 / 3.0).unwrap();
        let grid = sample_zero_boundary(64, 0.25, 3).unwrap();
        let opts = TraceOpts::new(0.05, 500);
        let z = Point::new(0.1, 0.1);
        // duplicate starts are rejected
        assert!(build_forest(&grid, &c, &[z, z], 0.0, &opts).is_err());
        // nearly identical starts merge immediately
        let f = build_forest(&grid, &c, &[z, z + Point::new(1e-9, 0.0)], 0.0, &opts).unwrap();
        match f.lines[1].status {
            Status::Merged { target, .. } => assert_eq!(target, 0),
            s => panic!("expected merge, got {s:?}"),
        }
        assert!(f.same_component(0, 1));
        // single start: one root
        let f1 = build_forest(&grid, &c, &[z], 0.0, &opts).unwrap();
        assert_eq!(f1.component_count(&[0]), 1);
        // start on the other's trace merges immediately
        let base = trace_flow_line(&grid, &c, z, 0.0, &opts).unwrap();
        let on_trace = base.points[base.points.len() / 2];
        let f2 = build_forest(&grid, &c, &[z, on_trace], 0.0, &opts).unwrap();
        assert!(matches!(f2.lines[1].status, Status::Merged { .. }));
    }

    #[test]
    fn forest_is_acyclic() {
        let c = derive_constants(4.0 / 3.0).unwrap();
        let grid = sample_zero_boundary(96, 0.25, 17)
            .unwrap()
            .scaled((2.0 * PI).sqrt());
        let opts = TraceOpts::new(0.06, 2000);
        let starts: Vec<Point> = (0..12)
            .map(|k| Point::new(-3.0 + 0.55 * k as f64, 0.3 * ((k * 7) % 5) as f64 - 0.6))
            .collect();
        let f = build_forest(&grid, &c, &starts, 1.2, &opts).unwrap();
        // each merged line has exactly one parent and chains terminate
        for line in &f.lines {
            if let Status::Merged { .. } = line.status {
                let mut cur = line.id;
                let mut hops = 0;
                while let Some(e) = f.parent_of(cur) {
                    cur = e.parent;
                    hops += 1;
                    assert!(hops <= f.lines.len(), "cycle through line {}", line.id);
                }
            }
        }
    }

    #[test]
    fn height_difference_arithmetic() {
        let c = derive_constants(2.0).unwrap();
        let mk = |theta: f64, turn: f64| FlowLine {
            id: 0,
            start: Point::new(0.0, 0.0),
            theta,
            points: vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)],
            turning: vec![0.0, turn],
            status: Status::MaxSteps,
            step: 1.0,
            own_len: 2,
        };
        let a = mk(0.0, 0.0);
        let b = mk(0.0, 0.0);
        let d = height_difference_at_hit(&a, &b, (0, 0), &c, 0.1).unwrap();
        assert_eq!(d.winding, 0);
        assert!(d.value.abs() < 1e-12);
        // theta gap pi/2 with one extra revolution at kappa = 2
        let b2 = mk(std::f64::consts::FRAC_PI_2, 2.0 * PI);
        let d2 = height_difference_at_hit(&a, &b2, (1, 1), &c, 0.1).unwrap();
        assert_eq!(d2.winding, 1);
        let expect = (2.0 * PI + std::f64::consts::FRAC_PI_2) * (2.0f64.sqrt() / 2.0);
        assert!((d2.value - expect).abs() < 1e-9, "{}", d2.value);
        // critical-angle gap: D = 2 lambda - pi chi exactly
        let tc = crate::params::critical_angle(2.0).unwrap();
        let b3 = mk(tc, 0.0);
        let d3 = height_difference_at_hit(&a, &b3, (0, 0), &c, 0.1).unwrap();
        assert!((d3.value - (2.0 * c.lambda - PI * c.chi)).abs() < 1e-9);
        // far-apart indices are an invalid hit
        let far = mk(0.0, 0.0);
        assert!(height_difference_at_hit(&a, &far, (0, 1), &c, 0.5).is_err());
    }

    #[test]
    fn interaction_classification() {
        let c = derive_constants(2.0).unwrap();
        let d = |v: f64| HeightDifference {
            value: v,
            winding: 0,
            side: Side::Right,
        };
        assert_eq!(classify_interaction(&d(0.0), &c), Interaction::Merges);
        assert_eq!(classify_interaction(&d(-PI * c.chi), &c), Interaction::CannotHit);
        assert_eq!(classify_interaction(&d(1.0), &c), Interaction::Bounces);
        assert_eq!(classify_interaction(&d(-0.5), &c), Interaction::Crosses);
        assert_eq!(
            classify_interaction(&d(2.0 * c.lambda - PI * c.chi + 0.01), &c),
            Interaction::CannotHit
        );
        // left side mirrors
        let left = HeightDifference {
            value: 0.5,
            winding: 0,
            side: Side::Left,
        };
        assert_eq!(classify_interaction(&left, &c), Interaction::Crosses);
    }

    #[test]
    fn crossing_counter_fixtures() {
        let seg = |pts: &[(f64, f64)]| -> Vec<Point> {
            pts.iter().map(|&(x, y)| Point::new(x, y)).collect()
        };
        let a = seg(&[(-1.0, 0.0), (1.0, 0.0)]);
        // identical polylines: no transversal crossing
        assert_eq!(count_polyline_crossings(&a, &a), 0);
        // single crossing
        let b = seg(&[(0.0, -1.0), (0.0, 1.0)]);
        assert_eq!(count_polyline_crossings(&a, &b), 1);
        // zig-zag crossing three times
        let z = seg(&[(-0.9, -0.5), (-0.5, 0.5), (0.0, -0.5), (0.5, 0.5), (0.7, 0.4)]);
        assert_eq!(count_polyline_crossings(&a, &z), 3);
        // tangential touch without side change
        let t = seg(&[(-0.5, 0.5), (0.0, 0.0), (0.5, 0.5)]);
        assert_eq!(count_polyline_crossings(&a, &t), 0);
    }

    #[test]
    fn minimal_height_difference_selection() {
        let c = derive_constants(2.0).unwrap();
        let d = minimal_height_difference(0.0, 0.5, &c, 2);
        assert_eq!(d.winding, 0);
        let d2 = minimal_height_difference(0.0, 2.0 * PI - 0.3, &c, 2);
        assert_eq!(d2.winding, -1);
        assert!((d2.value - (-0.3) * c.chi).abs() < 1e-12);
    }
}
