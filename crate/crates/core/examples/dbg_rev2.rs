use imgeo::gff::{sample_zero_boundary, BoundarySpec};
use imgeo::rng::{derive_seed, stream_rng};
use imgeo::spacefill::{
    order_points, reversal_visit_samples, reversal_weights, weights_to_boundary, SpaceFillConfig,
};
use imgeo::stats::field_scale;
use rand::Rng;
use rayon::prelude::*;

fn main() {
    let mesh: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(16);
    let fields: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(60);
    for (kp, r) in [(6.0, -0.5), (128.0, 0.0)] {
        let mut cfg = SpaceFillConfig::new(kp, r, r, mesh).unwrap();
        cfg.max_violation_share = 1.0;
        let c = cfg.dual_constants();
        let (a, b) = weights_to_boundary(kp, r, r).unwrap();
        let (rr1, rr2) = reversal_weights(kp, r, r).unwrap();
        let mut rcfg = SpaceFillConfig::new(kp, rr1, rr2, mesh).unwrap();
        rcfg.max_violation_share = 1.0;
        let (ra, rb) = weights_to_boundary(kp, rr1, rr2).unwrap();
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..fields as u64)
            .into_par_iter()
            .map(|k| {
                let seed = derive_seed(99, 0x7265_0000 + k);
                let n = 64;
                let sp = 2.0 / (n as f64 - 1.0);
                let mk = |label: u64, aa: f64, bb: f64| {
                    sample_zero_boundary(n, sp, derive_seed(seed, label))
                        .unwrap()
                        .scaled(field_scale())
                        .add_harmonic_boundary(&BoundarySpec::left_right(aa, bb))
                        .unwrap()
                };
                let fwd = order_points(&mk(1, a, b), &c, &cfg).unwrap();
                let rev = order_points(&mk(2, ra, rb), &c, &rcfg).unwrap();
                reversal_visit_samples(&fwd, &rev).unwrap()
            })
            .collect();
        let np = rows[0].0.len();
        let m = rows.len();
        // paired sup statistic on per-probe means
        let sup = |signs: &[f64]| -> f64 {
            let mut worst = 0.0f64;
            for p in 0..np {
                let mut d = 0.0;
                for (i, (f, rv)) in rows.iter().enumerate() {
                    d += signs[i] * (f[p] - rv[p]);
                }
                worst = worst.max((d / m as f64).abs());
            }
            worst
        };
        let t_obs = sup(&vec![1.0; m]);
        let mut rng = stream_rng(1, 2);
        let reps = 2000;
        let mut ge = 0usize;
        for _ in 0..reps {
            let signs: Vec<f64> =
                (0..m).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
            if sup(&signs) >= t_obs {
                ge += 1;
            }
        }
        let p = (ge + 1) as f64 / (reps + 1) as f64;
        println!("kp={kp} mesh={mesh} fields={m} probes={np} sup={t_obs:.4} perm_p={p:.5}");
    }
}
