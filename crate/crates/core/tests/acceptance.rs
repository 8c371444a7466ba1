//! End-to-end acceptance suite: one pass/fail line per criterion, all
//! criteria checked even when an early one fails.  Run with
//! `cargo test --test acceptance -- --nocapture` to watch the lines stream.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use imgeo::gff::sample_zero_boundary;
use imgeo::loewner::{
    drive_radial, loewner_trace, twisting, unwrapped_arg, DriverSpec, Kind,
};
use imgeo::params::{critical_angle, derive_constants};
use imgeo::rng::derive_seed;
use imgeo::spacefill::{order_points, SpaceFillConfig};
use imgeo::stats;

const ROOT_SEED: u64 = 0x1f2e_3d4c;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
}

fn run(name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t0 = Instant::now();
    let (pass, detail) = f();
    let o = Outcome {
        name,
        pass,
        detail,
        secs: t0.elapsed().as_secs_f64(),
    };
    println!(
        "{} {} ({:.1}s) {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.name,
        o.secs,
        o.detail
    );
    o
}

/// 1. Constants identities hold to 1e-12 across a 400-point kappa grid.
fn constants_identities() -> (bool, String) {
    let mut worst = 0.0f64;
    for k in 1..=400 {
        let kappa = 4.0 * k as f64 / 401.0;
        let c = derive_constants(kappa).unwrap();
        worst = worst.max(c.identity_residual());
    }
    (worst < 1e-12, format!("max residual {worst:.2e}"))
}

/// 2. Critical angle table: theta_c(4n/(n+1)) = n*pi for n=1..4, plus the
/// two named values theta_c(2) = pi and theta_c(8/3) = 2*pi.
fn critical_angle_table() -> (bool, String) {
    let mut worst = 0.0f64;
    for n in 1..=4u32 {
        let kappa = 4.0 * n as f64 / (n as f64 + 1.0);
        let tc = critical_angle(kappa).unwrap();
        worst = worst.max((tc - n as f64 * PI).abs());
    }
    worst = worst.max((critical_angle(2.0).unwrap() - PI).abs());
    worst = worst.max((critical_angle(8.0 / 3.0).unwrap() - 2.0 * PI).abs());
    (worst < 1e-12, format!("max deviation {worst:.2e}"))
}

/// 3. Gap-angle SDE stationarity: KS < 0.05 against the closed-form density
/// for three (kappa, rho) pairs, 1e5 decorrelated post-burn-in samples.
fn theta_stationarity() -> (bool, String) {
    let mut pass = true;
    let mut detail = String::new();
    for (i, (kappa, rho)) in [(2.0, 0.0), (3.0, 1.0), (8.0 / 3.0, -2.0 / 3.0)]
        .into_iter()
        .enumerate()
    {
        let r = stats::test_theta_stationary(
            kappa,
            rho,
            100_000,
            1e-4,
            50.0,
            400,
            derive_seed(ROOT_SEED, 0x3000 + i as u64),
        )
        .unwrap();
        pass &= r.verdict;
        detail.push_str(&format!("ks({kappa},{rho})={:.4} ", r.statistic));
    }
    (pass, detail)
}

/// Dense Dirichlet Green's function by straight Gaussian elimination:
/// returns the diagonal entry for interior vertex `k` of the m x m interior.
fn green_diagonal(m: usize, k: usize) -> f64 {
    let n = m * m;
    let idx = |i: usize, j: usize| j * m + i;
    let mut a = vec![0.0f64; n * n];
    for j in 0..m {
        for i in 0..m {
            let r = idx(i, j);
            a[r * n + r] = 4.0;
            if i > 0 {
                a[r * n + idx(i - 1, j)] = -1.0;
            }
            if i + 1 < m {
                a[r * n + idx(i + 1, j)] = -1.0;
            }
            if j > 0 {
                a[r * n + idx(i, j - 1)] = -1.0;
            }
            if j + 1 < m {
                a[r * n + idx(i, j + 1)] = -1.0;
            }
        }
    }
    let mut b = vec![0.0f64; n];
    b[k] = 1.0;
    // partial-pivot elimination
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| {
            a[p * n + col].abs().partial_cmp(&a[q * n + col].abs()).unwrap()
        });
        let piv = piv.unwrap();
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[row * n + c] -= f * a[col * n + c];
            }
            b[row] -= f * b[col];
        }
    }
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in row + 1..n {
            s -= a[row * n + c] * b[c];
        }
        b[row] = s / a[row * n + row];
    }
    b[k]
}

/// 4. Sampled field variance at 10 interior vertices matches the dense-solve
/// Green's function diagonal within 5%, 1e4 samples on a 16-point grid.
fn field_covariance() -> (bool, String) {
    let n = 16usize;
    let m = n - 2;
    let samples = 10_000usize;
    // spread probes across the interior, full-grid coordinates
    let probes: [(usize, usize); 10] = [
        (1, 1),
        (14, 14),
        (8, 8),
        (4, 11),
        (11, 4),
        (2, 7),
        (7, 2),
        (13, 8),
        (8, 13),
        (5, 5),
    ];
    let mut sums = [0.0f64; 10];
    let mut sq = [0.0f64; 10];
    for s in 0..samples {
        let grid =
            sample_zero_boundary(n, 0.1, derive_seed(ROOT_SEED, 0x4000 + s as u64)).unwrap();
        for (t, &(i, j)) in probes.iter().enumerate() {
            let v = grid.value(i, j);
            sums[t] += v;
            sq[t] += v * v;
        }
    }
    let mut worst = 0.0f64;
    for (t, &(i, j)) in probes.iter().enumerate() {
        let mean = sums[t] / samples as f64;
        let var = sq[t] / samples as f64 - mean * mean;
        let exact = green_diagonal(m, (j - 1) * m + (i - 1));
        worst = worst.max((var / exact - 1.0).abs());
    }
    (worst < 0.05, format!("max relative error {worst:.4}"))
}

/// 5. Same-angle flow lines merge in >= 90% of central pairs: 200-point
/// grid, 20 pairs per seed, 50 seeds.
fn merging() -> (bool, String) {
    let r = stats::test_merging(4.0 / 3.0, 200, 20, 50, derive_seed(ROOT_SEED, 0x5000)).unwrap();
    (r.verdict, format!("merge fraction {:.4}", r.statistic))
}

/// 6. Angle-gap crossing bound at kappa = 2: no pair crosses twice; contact
/// frequent below the critical gap, rare above it.  100 trials per gap.
fn crossing_bound() -> (bool, String) {
    let (lo, hi) = stats::crossing_gaps(2.0).unwrap();
    let sub =
        stats::test_crossing_bound(2.0, lo, 100, derive_seed(ROOT_SEED, 0x6000), true).unwrap();
    let sup =
        stats::test_crossing_bound(2.0, hi, 100, derive_seed(ROOT_SEED, 0x6001), false).unwrap();
    (
        sub.verdict && sup.verdict,
        format!("contact sub={:.2} sup={:.2}", sub.statistic, sup.statistic),
    )
}

/// 7. Trace multiplicity: simple at kappa = 8/3 with its boundary-filling
/// weight; at kappa = 3.6, rho = -1.6 revisits appear in >= half the seeds
/// and never exceed the self-hit budget.  20 seeds each.
fn multiplicity() -> (bool, String) {
    let simple = stats::test_multiplicity(
        8.0 / 3.0,
        2.0 - 8.0 / 3.0,
        20,
        derive_seed(ROOT_SEED, 0x7000),
        false,
    )
    .unwrap();
    let touching =
        stats::test_multiplicity(3.6, -1.6, 20, derive_seed(ROOT_SEED, 0x7001), true).unwrap();
    (
        simple.verdict && touching.verdict,
        format!(
            "simple hits {}/{}, touching hits {}/{}",
            simple.passes, simple.trials, touching.passes, touching.trials
        ),
    )
}

/// 8. Spiraling-rate recovery: mean winding-slope estimate within 0.3 of the
/// prescribed rate for beta in {-1, 0, 1}, 20 seeds each.
fn beta_recovery() -> (bool, String) {
    let mut pass = true;
    let mut detail = String::new();
    for (i, beta) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
        let r = stats::test_beta_recovery(
            2.0,
            0.0,
            beta,
            20,
            derive_seed(ROOT_SEED, 0x8000 + i as u64),
        )
        .unwrap();
        pass &= r.verdict;
        detail.push_str(&format!("beta {beta}: est {:.3}; ", r.statistic));
    }
    (pass, detail)
}

/// 9. Winding count vs derivative twisting: |2 pi N_eps - twist| <= 10 for
/// eps in {0.2, 0.1, 0.05} over 20 radial runs at kappa = 2.
fn winding_twisting() -> (bool, String) {
    let mut worst = 0.0f64;
    for run in 0..20u64 {
        let spec = DriverSpec::new(
            Kind::Radial,
            2.0,
            0.0,
            1e-3,
            10.0,
            derive_seed(ROOT_SEED, 0x9000 + run),
        );
        let d = drive_radial(&spec).unwrap();
        let trace = loewner_trace(&d, 10).unwrap();
        let args = unwrapped_arg(&trace.points);
        for eps in [0.2, 0.1, 0.05] {
            let Some(hit) = trace.points.iter().position(|p| p.norm() <= eps) else {
                return (false, format!("run {run} never reached modulus {eps}"));
            };
            let n_eps = ((args[hit] - args[0]) / (2.0 * PI)).floor();
            let tw = twisting(&d, &trace, eps).unwrap();
            worst = worst.max((2.0 * PI * n_eps - tw).abs());
        }
    }
    (worst <= 10.0, format!("max |2 pi N - twist| = {worst:.2}"))
}

/// 10. Ordering soundness: the induced before/after relation is total,
/// antisymmetric and transitive (exhaustive at mesh 16), and coarse/fine
/// orderings of the same field agree on >= 95% of pairs over 30 seeds.
fn ordering_soundness() -> (bool, String) {
    let field = |seed: u64| {
        sample_zero_boundary(64, 2.0 / 63.0, seed)
            .unwrap()
            .scaled(stats::field_scale())
    };
    let mut cfg16 = SpaceFillConfig::new(6.0, -0.5, -0.5, 16).unwrap();
    cfg16.max_violation_share = 1.0;
    let mut cfg32 = SpaceFillConfig::new(6.0, -0.5, -0.5, 32).unwrap();
    cfg32.max_violation_share = 1.0;
    let c = cfg16.dual_constants();

    // exhaustive relation check on one ordering
    let o = order_points(&field(derive_seed(ROOT_SEED, 0xa000)), &c, &cfg16).unwrap();
    let m = o.order.len();
    let mut pos = vec![usize::MAX; m];
    let mut sound = true;
    for (k, &p) in o.order.iter().enumerate() {
        sound &= p < m && pos[p] == usize::MAX;
        pos[p] = k;
    }
    for p in 0..m {
        for q in 0..m {
            let before = pos[p] < pos[q];
            let after = pos[q] < pos[p];
            if p == q {
                sound &= !before && !after;
            } else {
                sound &= before != after;
            }
        }
    }
    'triples: for p in 0..m {
        for q in 0..m {
            if pos[p] >= pos[q] {
                continue;
            }
            for r in 0..m {
                if pos[q] < pos[r] && pos[p] >= pos[r] {
                    sound = false;
                    break 'triples;
                }
            }
        }
    }

    // refinement agreement: each coarse cell covers a 2x2 block of fine cells
    let mut agree = 0usize;
    let mut total = 0usize;
    for s in 0..30u64 {
        let grid = field(derive_seed(ROOT_SEED, 0xa100 + s));
        let coarse = order_points(&grid, &c, &cfg16).unwrap();
        let fine = order_points(&grid, &c, &cfg32).unwrap();
        let block_time = |p: usize| {
            let (i, j) = (p % 16, p / 16);
            let mut t = 0.0;
            for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                t += fine.visit_time((2 * j + dj) * 32 + 2 * i + di);
            }
            t / 4.0
        };
        let vt: Vec<f64> = (0..256).map(|p| coarse.visit_time(p)).collect();
        let bt: Vec<f64> = (0..256).map(block_time).collect();
        for p in 0..256 {
            for q in p + 1..256 {
                total += 1;
                if (vt[p] < vt[q]) == (bt[p] < bt[q]) {
                    agree += 1;
                }
            }
        }
    }
    let frac = agree as f64 / total as f64;
    (
        sound && frac >= 0.95,
        format!("relation sound: {sound}, refinement agreement {frac:.4}"),
    )
}

/// 11. Reversal symmetry of the filling order: symmetric at kappa' = 6 with
/// centered weights (p > 0.01), rejected at kappa' = 128 with zero weights
/// (p < 0.01); 50 fields at mesh 32.
fn reversal() -> (bool, String) {
    let sym = stats::test_reversal(
        6.0,
        -0.5,
        -0.5,
        32,
        50,
        derive_seed(ROOT_SEED, 0xb000),
        true,
    )
    .unwrap();
    let asym = stats::test_reversal(
        128.0,
        0.0,
        0.0,
        32,
        50,
        derive_seed(ROOT_SEED, 0xb001),
        false,
    )
    .unwrap();
    (
        sym.verdict && asym.verdict,
        format!("p_sym={:.4} p_asym={:.2e}", sym.statistic, asym.statistic),
    )
}

/// 12. Transience: final modulus at least 4x the midpoint modulus in >= 90%
/// of 50 whole-plane runs at (2, 0) and (3, -1).
fn transience() -> (bool, String) {
    let a = stats::test_transience(2.0, 0.0, 50, derive_seed(ROOT_SEED, 0xc000)).unwrap();
    let b = stats::test_transience(3.0, -1.0, 50, derive_seed(ROOT_SEED, 0xc001)).unwrap();
    (
        a.verdict && b.verdict,
        format!("growth hits {}/{} and {}/{}", a.passes, a.trials, b.passes, b.trials),
    )
}

/// 13. Reproducibility: the full committed verification suite exits 0 and
/// writes byte-identical reports on a second run.
fn reproducibility() -> (bool, String) {
    let base = std::env::temp_dir().join(format!("imgeo-accept-{}", std::process::id()));
    let mut bytes = Vec::new();
    let mut ok = true;
    for run in 0..2 {
        let out = base.join(format!("run{run}"));
        let status = Command::new(env!("CARGO_BIN_EXE_imgeo"))
            .args(["verify", "--out"])
            .arg(&out)
            .output()
            .expect("spawn verify");
        ok &= status.status.success();
        bytes.push(std::fs::read(out.join("reports.jsonl")).unwrap_or_default());
    }
    let identical = bytes[0] == bytes[1] && !bytes[0].is_empty();
    let _ = std::fs::remove_dir_all(&base);
    (
        ok && identical,
        format!("exit ok: {ok}, byte-identical reports: {identical}"),
    )
}

#[test]
fn acceptance() {
    let outcomes = vec![
        run("1 constants identities", constants_identities),
        run("2 critical angle table", critical_angle_table),
        run("3 gap-angle stationarity", theta_stationarity),
        run("4 field covariance", field_covariance),
        run("5 same-angle merging", merging),
        run("6 crossing bound", crossing_bound),
        run("7 trace multiplicity", multiplicity),
        run("8 spiral rate recovery", beta_recovery),
        run("9 winding vs twisting", winding_twisting),
        run("10 ordering soundness", ordering_soundness),
        run("11 reversal symmetry", reversal),
        run("12 transience", transience),
        run("13 reproducibility", reproducibility),
    ];
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.pass)
        .map(|o| format!("{}: {}", o.name, o.detail))
        .collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
