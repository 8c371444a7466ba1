//! Space-filling order induced by the angle pi/2 and angle -pi/2 flow-line
//! forests: w comes before z when w's pi/2 line merges into z's pi/2 line
//! path on its right side.  The -pi/2 forest mirrors the rule with left,
//! but its lines also travel in the reversed direction, so in terms of the
//! stored approach side (relative to the target's travel direction) both
//! forests use the same test.
//! Includes the dictionaries between counterflow weights (rho1, rho2) and
//! strip boundary data (a, b), and the time-reversal weight reflection.

use crate::flow::{build_forest, Forest, Side, TraceOpts};
use crate::gff::FieldGrid;
use crate::params::{derive_constants, Constants};
use crate::{Error, Point, Result};
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Copy)]
pub struct SpaceFillConfig {
    pub kappa_prime: f64,
    pub rho1: f64,
    pub rho2: f64,
    /// Points per side of the ordering mesh.
    pub mesh: usize,
    /// Largest tolerated share of evidence pairs contradicted by the final
    /// order before the build is rejected.  Full-amplitude fields carry more
    /// merge-side noise than smooth ones, hence the permissive default.
    pub max_violation_share: f64,
}

impl SpaceFillConfig {
    pub fn new(kappa_prime: f64, rho1: f64, rho2: f64, mesh: usize) -> Result<Self> {
        check_weights(kappa_prime, rho1, rho2)?;
        if mesh == 0 {
            return Err(Error::Input("mesh must be positive".into()));
        }
        Ok(Self {
            kappa_prime,
            rho1,
            rho2,
            mesh,
            max_violation_share: 0.10,
        })
    }

    /// Strip boundary data implied by the weights.
    pub fn boundary(&self) -> (f64, f64) {
        weights_to_boundary(self.kappa_prime, self.rho1, self.rho2).unwrap()
    }

    /// Constants of the dual kappa = 16/kappa' whose flow lines build the
    /// ordering forests.
    pub fn dual_constants(&self) -> Constants {
        derive_constants(16.0 / self.kappa_prime).unwrap()
    }
}

fn check_weights(kappa_prime: f64, rho1: f64, rho2: f64) -> Result<()> {
    if !(kappa_prime > 4.0) {
        return Err(Error::Domain {
            name: "kappa_prime",
            reason: format!("{kappa_prime} not > 4"),
        });
    }
    let hi = kappa_prime / 2.0 - 2.0;
    for (name, rho) in [("rho1", rho1), ("rho2", rho2)] {
        if !(rho > -2.0 && rho < hi) {
            return Err(Error::Domain {
                name,
                reason: format!("{rho} outside (-2, {hi})"),
            });
        }
    }
    Ok(())
}

/// Boundary data of the strip picture: `a = lambda'(rho1 - kappa'/4 + 2)`,
/// `b = -lambda'(rho2 - kappa'/4 + 2)`; both bounded by lambda in modulus.
pub fn weights_to_boundary(kappa_prime: f64, rho1: f64, rho2: f64) -> Result<(f64, f64)> {
    check_weights(kappa_prime, rho1, rho2)?;
    let c = derive_constants(16.0 / kappa_prime)?;
    let a = c.lambda_prime * (rho1 - kappa_prime / 4.0 + 2.0);
    let b = -c.lambda_prime * (rho2 - kappa_prime / 4.0 + 2.0);
    Ok((a, b))
}

/// Inverse dictionary: `rho1 = a/lambda' + kappa'/4 - 2`,
/// `rho2 = -b/lambda' + kappa'/4 - 2`.
pub fn boundary_to_weights(kappa_prime: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = derive_constants(16.0 / kappa_prime)?;
    let rho1 = a / c.lambda_prime + kappa_prime / 4.0 - 2.0;
    let rho2 = -b / c.lambda_prime + kappa_prime / 4.0 - 2.0;
    check_weights(kappa_prime, rho1, rho2)?;
    Ok((rho1, rho2))
}

/// Weight pair of the time-reversed curve: each weight reflects through
/// `kappa'/2 - 4 - rho`, and the pair order swaps (the reversed curve sees
/// the strip sides exchanged).
pub fn reversal_weights(kappa_prime: f64, rho1: f64, rho2: f64) -> Result<(f64, f64)> {
    check_weights(kappa_prime, rho1, rho2)?;
    let refl = |rho: f64| kappa_prime / 2.0 - 4.0 - rho;
    Ok((refl(rho2), refl(rho1)))
}

/// How a pair's precedence was decided.
#[derive(Debug, Clone, Copy, Default)]
pub struct Evidence {
    pub l_decided: usize,
    pub r_decided: usize,
    pub boundary_decided: usize,
    pub index_decided: usize,
    /// Pairs where both forests produced a verdict, and how often they agree.
    pub both_checked: usize,
    pub both_agree: usize,
    /// Relation pairs contradicted by the final permutation.
    pub violations: usize,
    pub total_pairs: usize,
}

#[derive(Debug, Clone)]
pub struct SpaceFillOrder {
    pub points: Vec<Point>,
    pub mesh: usize,
    /// `order[k]` is the index of the k-th visited point.
    pub order: Vec<usize>,
    pub evidence: Evidence,
    pub pocket_areas: Vec<f64>,
    pub cell: f64,
}

impl SpaceFillOrder {
    /// Normalized visit time of point index `p` in [0, 1).
    pub fn visit_time(&self, p: usize) -> f64 {
        let rank = self.order.iter().position(|&q| q == p).unwrap();
        rank as f64 / self.order.len() as f64
    }
}

/// Merge chain of a line in a forest: (line, entry arc on that line, side of
/// approach); the line itself enters at arc 0 with no side.
fn chain(forest: &Forest, id: usize) -> Vec<(usize, usize, Option<Side>)> {
    let mut out = vec![(id, 0usize, None)];
    let mut cur = id;
    while let Some(e) = forest.parent_of(cur) {
        out.push((e.parent, e.arc, Some(e.side)));
        cur = e.parent;
    }
    out
}

/// Precedence of w over z by one forest's rule: walk w's chain to the first
/// line shared with z's chain; whichever chain enters that junction line
/// later merged into the other's path, and the stored approach side decides.
/// `before_side` is the side meaning "comes before" (Right for the pi/2
/// forest, Left for the -pi/2 forest).
fn forest_rule(forest: &Forest, w: usize, z: usize, before_side: Side) -> Option<bool> {
    let cw = chain(forest, w);
    let cz = chain(forest, z);
    let (line, aw, sw) = cw
        .iter()
        .find(|(line, _, _)| cz.iter().any(|(l2, _, _)| l2 == line))?
        .to_owned();
    let (_, az, sz) = *cz.iter().find(|(l2, _, _)| *l2 == line).unwrap();
    if aw > az {
        sw.map(|s| s == before_side)
    } else if az > aw {
        sz.map(|s| s != before_side)
    } else {
        None
    }
}

/// Exit position of a chain's root along the window boundary, measured
/// counterclockwise from the bottom-right corner.  Upward-running lines exit
/// through the top, and an exit further to the right means the line would
/// strike its neighbors from the right, so smaller key = visited earlier.
fn exit_key(forest: &Forest, id: usize, w: &crate::gff::Window) -> f64 {
    let root = chain(forest, id).last().unwrap().0;
    let line = &forest.lines[root];
    let p = *line.points.last().unwrap();
    // distances to the four edges pick the exit edge
    let dr = (w.x1 - p.re).abs();
    let dt = (w.y1 - p.im).abs();
    let dl = (p.re - w.x0).abs();
    let db = (p.im - w.y0).abs();
    let (wd, ht) = (w.width(), w.height());
    let m = dr.min(dt).min(dl).min(db);
    if m == dr {
        p.im - w.y0
    } else if m == dt {
        ht + (w.x1 - p.re)
    } else if m == dl {
        ht + wd + (w.y1 - p.im)
    } else {
        2.0 * ht + wd + (p.re - w.x0)
    }
}

/// Build the ordering of the mesh points over a prepared field (boundary
/// data already applied).  The pi/2 forest decides; the -pi/2 forest breaks
/// ties; chains without a shared line fall back to boundary-exit height.
pub fn order_points(grid: &FieldGrid, c: &Constants, cfg: &SpaceFillConfig) -> Result<SpaceFillOrder> {
    let mesh = cfg.mesh;
    let m = mesh * mesh;
    let w = grid.window;
    let cell = w.width() / mesh as f64;
    let mut points = Vec::with_capacity(m);
    for j in 0..mesh {
        for i in 0..mesh {
            points.push(Point::new(
                w.x0 + (i as f64 + 0.5) * cell,
                w.y0 + (j as f64 + 0.5) * cell,
            ));
        }
    }
    if m == 1 {
        return Ok(SpaceFillOrder {
            points,
            mesh,
            order: vec![0],
            evidence: Evidence {
                total_pairs: 0,
                ..Default::default()
            },
            pocket_areas: vec![cell * cell],
            cell,
        });
    }

    let step = grid.spacing.min(cell / 2.0);
    let opts = TraceOpts::new(step, (30.0 * w.width() / step) as usize);
    let fl = build_forest(grid, c, &points, FRAC_PI_2, &opts)?;
    let fr = build_forest(grid, c, &points, -FRAC_PI_2, &opts)?;

    let mut ev = Evidence::default();
    // before[p*m + q] = 1 if p before q, -1 if after, 0 unknown
    let mut rel = vec![0i8; m * m];
    for p in 0..m {
        for q in p + 1..m {
            let l = forest_rule(&fl, p, q, Side::Right);
            let r = forest_rule(&fr, p, q, Side::Left);
            if let (Some(a), Some(b)) = (l, r) {
                ev.both_checked += 1;
                if a == b {
                    ev.both_agree += 1;
                }
            }
            // decision hierarchy keeps the relation acyclic by construction:
            // within an L-component the junction rule (or the R rule on
            // equal-arc ties) decides; across components the strict order of
            // root exit keys decides, so mixed triangles cannot cycle
            let same_comp = fl.same_component(p, q);
            let verdict = if same_comp {
                match (l, r) {
                    (Some(a), _) => {
                        ev.l_decided += 1;
                        a
                    }
                    (None, Some(b)) => {
                        ev.r_decided += 1;
                        b
                    }
                    (None, None) => {
                        ev.index_decided += 1;
                        p < q
                    }
                }
            } else {
                let (kp, kq) = (exit_key(&fl, p, &w), exit_key(&fl, q, &w));
                if kp != kq {
                    ev.boundary_decided += 1;
                    kp < kq
                } else {
                    ev.index_decided += 1;
                    p < q
                }
            };
            rel[p * m + q] = if verdict { 1 } else { -1 };
            rel[q * m + p] = -rel[p * m + q];
        }
    }
    ev.total_pairs = m * (m - 1) / 2;

    // Kahn topological sort on (indegree, index): zero-indegree nodes come
    // out lowest index first, and a cycle is broken at its least-constrained
    // node instead of collapsing to index order.  The heap is lazy: stale
    // entries are skipped by re-checking the current indegree.
    let mut indeg = vec![0usize; m];
    for p in 0..m {
        for q in 0..m {
            if rel[p * m + q] == -1 {
                indeg[p] += 1;
            }
        }
    }
    let mut heap: BinaryHeap<std::cmp::Reverse<(usize, usize)>> =
        (0..m).map(|p| std::cmp::Reverse((indeg[p], p))).collect();
    let mut placed = vec![false; m];
    let mut order = Vec::with_capacity(m);
    while let Some(std::cmp::Reverse((d, p))) = heap.pop() {
        if placed[p] || d != indeg[p] {
            continue;
        }
        placed[p] = true;
        order.push(p);
        for q in 0..m {
            if !placed[q] && rel[p * m + q] == 1 {
                indeg[q] -= 1;
                heap.push(std::cmp::Reverse((indeg[q], q)));
            }
        }
    }

    // count relation pairs contradicted by the final order
    let mut pos = vec![0usize; m];
    for (k, &p) in order.iter().enumerate() {
        pos[p] = k;
    }
    for p in 0..m {
        for q in p + 1..m {
            let r = rel[p * m + q];
            if (r == 1 && pos[p] > pos[q]) || (r == -1 && pos[p] < pos[q]) {
                ev.violations += 1;
            }
        }
    }
    if ev.violations as f64 > cfg.max_violation_share * ev.total_pairs as f64 {
        return Err(Error::OrderingFailure {
            cycle_pairs: ev.violations,
            total_pairs: ev.total_pairs,
        });
    }

    Ok(SpaceFillOrder {
        points,
        mesh,
        order,
        evidence: ev,
        pocket_areas: vec![cell * cell; m],
        cell,
    })
}

/// The area-parameterized curve: cell centroids in visit order, each visit
/// advancing time by its cell area.
#[derive(Debug, Clone)]
pub struct Curve {
    pub points: Vec<Point>,
    /// Cumulative area-time after each visit; last entry = window area.
    pub area_time: Vec<f64>,
}

pub fn space_filling_curve(order: &SpaceFillOrder) -> Curve {
    let mut points = Vec::with_capacity(order.order.len());
    let mut area_time = Vec::with_capacity(order.order.len());
    let mut acc = 0.0;
    for &p in &order.order {
        points.push(order.points[p]);
        acc += order.pocket_areas[p];
        area_time.push(acc);
    }
    Curve { points, area_time }
}

impl Curve {
    pub fn rows(&self) -> impl Iterator<Item = (usize, f64, f64, f64)> + '_ {
        self.points
            .iter()
            .zip(&self.area_time)
            .enumerate()
            .map(|(k, (p, &a))| (k, p.re, p.im, a))
    }
}

/// Two-sample KS statistic between the forward visit-time law and the
/// time-reversed one: forward times of a central probe set against
/// `1 - t` of the reversed order at the 180-degree rotated probes.
pub fn reversal_symmetry_stat(forward: &SpaceFillOrder, reversed: &SpaceFillOrder) -> Result<f64> {
    if forward.mesh != reversed.mesh {
        return Err(Error::Input(format!(
            "mesh mismatch: {} vs {}",
            forward.mesh, reversed.mesh
        )));
    }
    let (a, b) = reversal_visit_samples(forward, reversed)?;
    Ok(crate::stats::ks_two_sample_stat(&a, &b))
}

/// The two visit-time samples entering the reversal comparison (exposed so
/// a harness can pool them across independent fields).
pub fn reversal_visit_samples(
    forward: &SpaceFillOrder,
    reversed: &SpaceFillOrder,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mesh = forward.mesh;
    if mesh != reversed.mesh {
        return Err(Error::Input("mesh mismatch".into()));
    }
    let mut fwd = Vec::new();
    let mut rev = Vec::new();
    let c = (mesh as f64 - 1.0) / 2.0;
    for j in 0..mesh {
        for i in 0..mesh {
            // central disk probe set (rotation-invariant)
            let r2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
            if r2 > (mesh as f64 / 4.0).powi(2) {
                continue;
            }
            let p = j * mesh + i;
            let p_rot = (mesh - 1 - j) * mesh + (mesh - 1 - i);
            fwd.push(forward.visit_time(p));
            rev.push(1.0 - reversed.visit_time(p_rot));
        }
    }
    Ok((fwd, rev))
}
