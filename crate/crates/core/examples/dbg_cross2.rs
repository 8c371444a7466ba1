use imgeo::flow::{count_crossing_events, smooth_polyline, trace_flow_line, TraceOpts};
use imgeo::gff::sample_zero_boundary;
use imgeo::params::{critical_angle, derive_constants};
use imgeo::rng::derive_seed;
use imgeo::stats::field_scale;
use imgeo::Point;
use rayon::prelude::*;

fn min_dist_outside(a: &[Point], b: &[Point], center: Point, r: f64) -> f64 {
    let mut best = f64::INFINITY;
    for &p in a {
        if (p - center).norm() < r {
            continue;
        }
        for &q in b {
            if (q - center).norm() < r {
                continue;
            }
            best = best.min((p - q).norm());
        }
    }
    best
}

fn main() {
    let kappa = 2.0;
    let c = derive_constants(kappa).unwrap();
    let tc = critical_angle(kappa).unwrap();
    let n: usize = 150;
    let div: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4.0);
    let offs: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let ball: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let trials = 40u64;
    for &(label, gap) in &[("sub", 0.5 * tc), ("sup", 1.5 * tc)] {
        let rows: Vec<(usize, f64)> = (0..trials)
            .into_par_iter()
            .map(|k| {
                let seed = derive_seed(99, 0x6372_0000 + k);
                let spacing = 4.0 / (n as f64 - 1.0);
                let grid = sample_zero_boundary(n, spacing, seed).unwrap().scaled(field_scale());
                let step = spacing / div;
                let opts = TraceOpts::new(step, (40.0 * div) as usize * n);
                let z0 = Point::new(-0.5, 0.0);
                let a = trace_flow_line(&grid, &c, z0, 0.0, &opts).unwrap();
                let dir = a.direction(0);
                let z1 = z0 - Point::new(0.0, 1.0) * dir * (offs * spacing);
                let b = trace_flow_line(&grid, &c, z1, gap, &opts).unwrap();
                let sa = smooth_polyline(&a.points, 5);
                let sb = smooth_polyline(&b.points, 5);
                let ev = count_crossing_events(&sa, &sb, 10);
                let d = min_dist_outside(&sa, &sb, z0, ball * spacing);
                (ev, d)
            })
            .collect();
        let spacing = 4.0 / (n as f64 - 1.0);
        let ev1 = rows.iter().filter(|r| r.0 >= 1).count();
        let ev2 = rows.iter().filter(|r| r.0 >= 2).count();
        let mut ds: Vec<f64> = rows.iter().map(|r| r.1 / spacing).collect();
        ds.sort_by(f64::total_cmp);
        let q = |f: f64| ds[((ds.len() - 1) as f64 * f) as usize];
        println!(
            "{label}: ev>=1 {ev1}/{trials} ev>=2 {ev2} dist/spacing deciles: 10%={:.2} 30%={:.2} 50%={:.2} 70%={:.2} 90%={:.2}",
            q(0.1), q(0.3), q(0.5), q(0.7), q(0.9)
        );
        let contact1 = rows.iter().filter(|r| r.0 >= 1 || r.1 < 1.0 * spacing).count();
        let contact2 = rows.iter().filter(|r| r.0 >= 1 || r.1 < 2.0 * spacing).count();
        println!("  contact(ev or d<1sp)={contact1} contact(ev or d<2sp)={contact2}");
    }
}
