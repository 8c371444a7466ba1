use imgeo::flow::{build_forest, FlowLine, TraceOpts};
use imgeo::gff::sample_zero_boundary;
use imgeo::params::derive_constants;
use imgeo::rng::{derive_seed, stream_rng};
use imgeo::stats::field_scale;
use imgeo::Point;
use rand::Rng;
use rayon::prelude::*;

fn main() {
    let kappa = 4.0 / 3.0;
    let c = derive_constants(kappa).unwrap();
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let div: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let r: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let seeds = 10u64;
    let pairs = 10usize;
    let rows: Vec<(usize, usize, usize)> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let seed = derive_seed(7, 0x6d65_0000 + s);
            let spacing = 4.0 / (n as f64 - 1.0);
            let grid = sample_zero_boundary(n, spacing, seed).unwrap().scaled(field_scale());
            let opts = TraceOpts::new(spacing / div, (30.0 * div) as usize * n);
            let mut rng = stream_rng(seed, 0x6d65_7267);
            let central = |l: &FlowLine| {
                l.points[..l.own_len].iter().all(|p| p.re.abs() <= 1.0 && p.im.abs() <= 1.0)
            };
            let (mut total, mut kept, mut merged) = (0, 0, 0);
            for _ in 0..pairs {
                let p = Point::new(rng.gen_range(-r..r), rng.gen_range(-r..r));
                let q = p + Point::from_polar(
                    rng.gen_range(0.1..0.6),
                    rng.gen_range(0.0..2.0 * std::f64::consts::PI),
                );
                if !grid.window.contains(q) {
                    continue;
                }
                total += 1;
                let f = build_forest(&grid, &c, &[p, q], 0.0, &opts).unwrap();
                let central_upto = |pts: &[Point]| {
                    pts.iter().all(|p| p.re.abs() <= 1.0 && p.im.abs() <= 1.0)
                };
                if let Some(e) = f.parent_of(1) {
                    let child = &f.lines[1];
                    let parent = &f.lines[0];
                    if central_upto(&child.points[..child.own_len])
                        && central_upto(&parent.points[..=e.arc.min(parent.points.len() - 1)])
                    {
                        kept += 1;
                        merged += 1;
                    }
                } else if central(&f.lines[0]) && central(&f.lines[1]) {
                    kept += 1;
                }
            }
            (total, kept, merged)
        })
        .collect();
    let t: usize = rows.iter().map(|r| r.0).sum();
    let k: usize = rows.iter().map(|r| r.1).sum();
    let m: usize = rows.iter().map(|r| r.2).sum();
    println!("total={t} central={k} merged={m} frac={:.3}", m as f64 / k.max(1) as f64);
}
