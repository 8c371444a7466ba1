use imgeo::flow::{trace_flow_line, TraceOpts};
use imgeo::gff::sample_zero_boundary;
use imgeo::params::derive_constants;
use imgeo::rng::derive_seed;
use imgeo::stats::field_scale;
use imgeo::Point;

fn main() {
    let kappa = 2.0;
    let c = derive_constants(kappa).unwrap();
    let n = 150;
    let spacing = 4.0 / (n as f64 - 1.0);
    let seed = derive_seed(99, 0x6372_0000);
    let grid = sample_zero_boundary(n, spacing, seed).unwrap().scaled(field_scale());
    let opts = TraceOpts::new(spacing, 20 * n);
    let a = trace_flow_line(&grid, &c, Point::new(-0.5, 0.0), 0.0, &opts).unwrap();
    println!("status {:?} len {}", a.status, a.points.len());
    let m = a.points.len();
    for i in (0..m).step_by(m / 20) {
        let p = a.points[i];
        let disp = (p - a.points[0]).norm();
        println!(
            "i={i:5} pos=({:+.3},{:+.3}) disp={disp:.3} turning={:+.1}",
            p.re, p.im, a.turning[i]
        );
    }
    for i in 300..312 {
        let p = a.points[i];
        println!("fine i={i} pos=({:+.6},{:+.6}) turn={:+.4}", p.re, p.im, a.turning[i]);
    }
    // local loop diagnosis: displacement over 50-step windows
    let mut small = 0;
    for i in 0..m.saturating_sub(50) {
        if (a.points[i + 50] - a.points[i]).norm() < 5.0 * spacing {
            small += 1;
        }
    }
    println!("windows of 50 steps with net displacement < 5 spacing: {small}/{}", m - 50);
}
