use imgeo::flow::{trace_flow_line, trace_with_target, Interaction, Status, TraceOpts};
use imgeo::gff::sample_zero_boundary;
use imgeo::params::{critical_angle, derive_constants};
use imgeo::rng::derive_seed;
use imgeo::stats::field_scale;
use imgeo::Point;
use rayon::prelude::*;

fn main() {
    let kappa = 2.0;
    let c = derive_constants(kappa).unwrap();
    let tc = critical_angle(kappa).unwrap();
    let n: usize = 150;
    let div: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4.0);
    let tolf: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let offs: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let trials = 60u64;
    for &(label, gap) in &[("sub", 0.5 * tc), ("sup", 1.5 * tc)] {
        let rows: Vec<(bool, usize, usize, bool, bool)> = (0..trials)
            .into_par_iter()
            .map(|k| {
                let seed = derive_seed(99, 0x6372_0000 + k);
                let spacing = 4.0 / (n as f64 - 1.0);
                let grid = sample_zero_boundary(n, spacing, seed).unwrap().scaled(field_scale());
                let opts = TraceOpts::new(spacing / div, (40.0 * div) as usize * n);
                let z0 = Point::new(-0.5, 0.0);
                let a = trace_flow_line(&grid, &c, z0, 0.0, &opts).unwrap();
                let dir = a.direction(0);
                let z1 = z0 - Point::new(0.0, 1.0) * dir * (offs * spacing);
                let (b, events) =
                    trace_with_target(&grid, &c, z1, gap, &opts, &a, tolf * spacing).unwrap();
                let touched = events.iter().any(|e| e.kind != Interaction::CannotHit);
                let stalled = b.status == Status::MaxSteps && b.points.len() < opts.max_steps;
                if stalled {
                    let end = b.points.len() - 1;
                    let near_ev = events
                        .iter()
                        .map(|e| end.saturating_sub(e.arc_self))
                        .min()
                        .map(|d| d as i64)
                        .unwrap_or(-1);
                    eprintln!(
                        "stall seed={k} len={} events={} steps_since_event={near_ev}",
                        b.points.len(),
                        events.len()
                    );
                }
                (
                    touched,
                    a.points.len(),
                    b.points.len(),
                    a.status == Status::MaxSteps,
                    stalled,
                )
            })
            .collect();
        let touched = rows.iter().filter(|r| r.0).count();
        let la: f64 = rows.iter().map(|r| r.1 as f64).sum::<f64>() / trials as f64;
        let lb: f64 = rows.iter().map(|r| r.2 as f64).sum::<f64>() / trials as f64;
        let sa = rows.iter().filter(|r| r.3).count();
        let sb = rows.iter().filter(|r| r.4).count();
        println!(
            "{label}: contact {touched}/{trials} mean_len a={la:.0} b={lb:.0} stalled a={sa} b={sb}"
        );
    }
}
