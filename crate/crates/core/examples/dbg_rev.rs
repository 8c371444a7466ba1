use imgeo::stats::test_reversal;

fn main() {
    let mesh: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(32);
    let fields: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(50);
    let seed = 0x1f2e_3d4c + 1000 * 5;
    let t0 = std::time::Instant::now();
    let r1 = test_reversal(6.0, -0.5, -0.5, mesh, fields, seed, true).unwrap();
    println!("{} p={:.5} verdict={} [{:.1}s]", r1.name, r1.statistic, r1.verdict, t0.elapsed().as_secs_f64());
    let t1 = std::time::Instant::now();
    let r2 = test_reversal(128.0, 0.0, 0.0, mesh, fields, seed + 1, false).unwrap();
    println!("{} p={:.5} verdict={} [{:.1}s]", r2.name, r2.statistic, r2.verdict, t1.elapsed().as_secs_f64());
}
