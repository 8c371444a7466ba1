use imgeo::loewner::{drive_wholeplane, loewner_trace, DriverSpec, Kind};
use imgeo::rng::derive_seed;
use imgeo::stats::point_multiplicity;
use rayon::prelude::*;

fn main() {
    let stride: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let dt: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let mults: Vec<(usize, f64)> = (0..8u64)
        .into_par_iter()
        .map(|k| {
            let seed = derive_seed(0x1f2e_3d4c + 1000 * 3, 0x6d75_0000 + k);
            let mut spec = DriverSpec::new(Kind::WholePlane, 8.0 / 3.0, 2.0 - 8.0 / 3.0, dt, 6.0, seed);
            spec.t_start = -3.0;
            let d = drive_wholeplane(&spec).unwrap();
            let trace = loewner_trace(&d, stride).unwrap();
            let min_gap = trace
                .points
                .windows(2)
                .map(|w| (w[1] - w[0]).norm())
                .fold(f64::INFINITY, f64::min);
            let tol = 2.0 * min_gap;
            let pts = &trace.points;
            'outer: for i in 0..pts.len() {
                let mut prev: Option<usize> = None;
                for j in 0..pts.len() {
                    if (pts[j] - pts[i]).norm() > tol {
                        continue;
                    }
                    if let Some(l) = prev {
                        if pts[l + 1..j].iter().any(|q| (q - pts[i]).norm() > 3.0 * tol) {
                            eprintln!(
                                "seed {k}: revisit i={i} j={j} |p|={:.4} d={:.2e} tol={tol:.2e}",
                                pts[i].norm(),
                                (pts[j] - pts[i]).norm()
                            );
                            break 'outer;
                        }
                    }
                    prev = Some(j);
                }
            }
            (point_multiplicity(&trace.points, 2.0 * min_gap), min_gap)
        })
        .collect();
    println!("{mults:?}");
}
