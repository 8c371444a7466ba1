//! Batch front end: field sampling, flow-line tracing, driving-function
//! simulation, space-filling ordering, and the verification suite.  Every
//! run writes a JSON manifest with the full invocation and output hashes so
//! results can be replayed and compared byte for byte.

use clap::{Args, Parser, Subcommand};
use imgeo::gff::{sample_zero_boundary, BoundarySpec, FieldGrid};
use imgeo::io::{
    field_to_rgb, file_sha256, write_curve_csv, write_driver_csv, write_forest_csv,
    write_polyline_csv, write_ppm, write_trace_csv, Manifest,
};
use imgeo::loewner::{
    drive_chordal, drive_radial, drive_wholeplane, loewner_trace, twisting, winding_beta_estimate,
    DriverSpec, Kind,
};
use imgeo::params::derive_constants;
use imgeo::spacefill::{
    order_points, reversal_symmetry_stat, reversal_weights, space_filling_curve,
    weights_to_boundary, SpaceFillConfig,
};
use imgeo::stats::{self, field_scale, TestReport};
use imgeo::{flow, Point};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "imgeo", version, about = "imaginary-geometry simulation toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a zero-boundary field and render it
    Gff(GffArgs),
    /// Trace flow-line forests from random starts
    Flow(FlowArgs),
    /// Simulate a driving function and reconstruct the trace
    Sle(SleArgs),
    /// Build the space-filling visit order over a mesh
    Spacefill(SpacefillArgs),
    /// Run the Monte Carlo verification suite
    Verify(VerifyArgs),
}

fn d_n() -> usize {
    128
}
fn d_seed() -> u64 {
    1
}
fn d_out() -> PathBuf {
    PathBuf::from("out")
}
fn d_kappa() -> f64 {
    2.0
}
fn d_thetas() -> Vec<f64> {
    vec![FRAC_PI_2, -FRAC_PI_2]
}
fn d_starts() -> usize {
    100
}
fn d_kind() -> String {
    "chordal".into()
}
fn d_rho() -> Vec<f64> {
    vec![0.0]
}
fn d_dt() -> f64 {
    1e-3
}
fn d_horizon() -> f64 {
    1.0
}
fn d_stride() -> usize {
    4
}
fn d_kappa_prime() -> f64 {
    6.0
}
fn d_rho_sf() -> f64 {
    -0.5
}
fn d_mesh() -> usize {
    16
}
fn d_n_sf() -> usize {
    64
}
fn d_verify_seed() -> u64 {
    0x1f2e_3d4c
}

#[derive(Args, Serialize, Deserialize, Clone)]
struct GffArgs {
    /// Read all arguments from a JSON file mirroring the flags
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Vertices per side
    #[arg(long, default_value_t = d_n())]
    #[serde(default = "d_n")]
    n: usize,
    /// Validate against this kappa (names the parameter on error)
    #[arg(long)]
    #[serde(default)]
    kappa: Option<f64>,
    /// Conical singularity angle weight at the window center
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    alpha: f64,
    /// Log-spiral weight at the window center
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    beta: f64,
    #[arg(long, default_value_t = d_seed())]
    #[serde(default = "d_seed")]
    seed: u64,
    #[arg(long, default_value = "out")]
    #[serde(default = "d_out")]
    out: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Clone)]
struct FlowArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = d_kappa())]
    #[serde(default = "d_kappa")]
    kappa: f64,
    /// Flow-line angles (repeatable)
    #[arg(long = "theta", num_args = 1.., default_values_t = d_thetas())]
    #[serde(default = "d_thetas")]
    theta: Vec<f64>,
    /// Number of random interior starts
    #[arg(long, default_value_t = d_starts())]
    #[serde(default = "d_starts")]
    starts: usize,
    /// Single start "x,y" (overrides --starts)
    #[arg(long)]
    #[serde(default)]
    start: Option<String>,
    #[arg(long, default_value_t = d_n())]
    #[serde(default = "d_n")]
    n: usize,
    #[arg(long, default_value_t = d_seed())]
    #[serde(default = "d_seed")]
    seed: u64,
    #[arg(long, default_value = "out")]
    #[serde(default = "d_out")]
    out: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Clone)]
struct SleArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// chordal | radial | whole-plane
    #[arg(long, default_value = "chordal")]
    #[serde(default = "d_kind")]
    kind: String,
    #[arg(long, default_value_t = d_kappa())]
    #[serde(default = "d_kappa")]
    kappa: f64,
    /// Force-point weights (repeatable; chordal pairs with --force-point)
    #[arg(long = "rho", num_args = 1.., default_values_t = d_rho())]
    #[serde(default = "d_rho")]
    rho: Vec<f64>,
    /// Chordal force-point locations, one per --rho (default 0+ for each)
    #[arg(long = "force-point", num_args = 0..)]
    #[serde(default)]
    force_point: Vec<f64>,
    /// Spiraling drift (whole-plane/radial)
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    mu: f64,
    #[arg(long, default_value_t = d_dt())]
    #[serde(default = "d_dt")]
    dt: f64,
    #[arg(long, default_value_t = d_horizon())]
    #[serde(default = "d_horizon")]
    horizon: f64,
    /// Whole-plane equilibration time (default 50)
    #[arg(long = "burn-in")]
    #[serde(default)]
    burn_in: Option<f64>,
    /// Capacity time of the first recorded sample
    #[arg(long = "t-start", default_value_t = 0.0)]
    #[serde(default)]
    t_start: f64,
    /// Emit every stride-th trace point
    #[arg(long, default_value_t = d_stride())]
    #[serde(default = "d_stride")]
    stride: usize,
    /// Estimate the spiraling rate from the trace winding
    #[arg(long = "beta-estimate", default_value_t = false)]
    #[serde(default)]
    beta_estimate: bool,
    /// Comma-separated radii for a twisting sweep, e.g. "0.4,0.2,0.1"
    #[arg(long = "twist-sweep")]
    #[serde(default)]
    twist_sweep: Option<String>,
    #[arg(long, default_value_t = d_seed())]
    #[serde(default = "d_seed")]
    seed: u64,
    #[arg(long, default_value = "out")]
    #[serde(default = "d_out")]
    out: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Clone)]
struct SpacefillArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long = "kappa-prime", default_value_t = d_kappa_prime())]
    #[serde(default = "d_kappa_prime")]
    kappa_prime: f64,
    #[arg(long, default_value_t = d_rho_sf())]
    #[serde(default = "d_rho_sf")]
    rho1: f64,
    #[arg(long, default_value_t = d_rho_sf())]
    #[serde(default = "d_rho_sf")]
    rho2: f64,
    #[arg(long, default_value_t = d_mesh())]
    #[serde(default = "d_mesh")]
    mesh: usize,
    #[arg(long, default_value_t = d_n_sf())]
    #[serde(default = "d_n_sf")]
    n: usize,
    /// Also order the time-reversed configuration and emit the symmetry stat
    #[arg(long, default_value_t = false)]
    #[serde(default)]
    reverse: bool,
    #[arg(long, default_value_t = d_seed())]
    #[serde(default = "d_seed")]
    seed: u64,
    #[arg(long, default_value = "out")]
    #[serde(default = "d_out")]
    out: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Clone)]
struct VerifyArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Test selection (repeatable): theta, merging, crossing, multiplicity,
    /// beta, reversal, transience.  Default: all.
    #[arg(long = "test", num_args = 0..)]
    #[serde(default)]
    test: Vec<String>,
    #[arg(long, default_value_t = d_verify_seed())]
    #[serde(default = "d_verify_seed")]
    seed: u64,
    #[arg(long, default_value = "out")]
    #[serde(default = "d_out")]
    out: PathBuf,
}

fn env_seed(seed: u64) -> u64 {
    match std::env::var("IMGEO_SEED") {
        Ok(s) => s.parse().unwrap_or(seed),
        Err(_) => seed,
    }
}

fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
}

fn finish_manifest(
    out: &Path,
    name: &str,
    seed: u64,
    invocation: serde_json::Value,
    files: &[PathBuf],
) -> Result<PathBuf, String> {
    let mut m = Manifest::new(seed, invocation);
    for f in files {
        m.add_output(f).map_err(|e| e.to_string())?;
    }
    let path = out.join(format!("{name}.manifest.json"));
    m.write(&path).map_err(|e| e.to_string())?;
    Ok(path)
}

fn hue_rgb(h: f64) -> [u8; 3] {
    let h = (h.rem_euclid(1.0)) * 6.0;
    let f = h.fract();
    let (r, g, b) = match h as usize {
        0 => (1.0, f, 0.0),
        1 => (1.0 - f, 1.0, 0.0),
        2 => (0.0, 1.0, f),
        3 => (0.0, 1.0 - f, 1.0),
        4 => (f, 0.0, 1.0),
        _ => (1.0, 0.0, 1.0 - f),
    };
    [(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8]
}

fn grid_to_gray(grid: &FieldGrid) -> Vec<u8> {
    let n = grid.n;
    let amax = grid
        .values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let mut px = vec![0u8; 3 * n * n];
    for j in 0..n {
        for i in 0..n {
            let v = grid.values[(n - 1 - j) * n + i] / amax;
            let g = (127.5 + 127.5 * v).clamp(0.0, 255.0) as u8;
            let o = 3 * (j * n + i);
            px[o] = g;
            px[o + 1] = g;
            px[o + 2] = g;
        }
    }
    px
}

/// Paint a polyline into an image over the field window.
fn raster_line(px: &mut [u8], n: usize, w: &imgeo::gff::Window, pts: &[Point], rgb: [u8; 3]) {
    for p in pts {
        let i = ((p.re - w.x0) / w.width() * (n as f64 - 1.0)).round();
        let j = ((p.im - w.y0) / w.height() * (n as f64 - 1.0)).round();
        if i < 0.0 || j < 0.0 || i >= n as f64 || j >= n as f64 {
            continue;
        }
        let o = 3 * ((n - 1 - j as usize) * n + i as usize);
        px[o..o + 3].copy_from_slice(&rgb);
    }
}

fn cmd_gff(mut a: GffArgs) -> Result<(), String> {
    if let Some(c) = &a.config {
        let c = c.clone();
        a = load_config(&c)?;
    }
    a.seed = env_seed(a.seed);
    if let Some(k) = a.kappa {
        derive_constants(k).map_err(|e| e.to_string())?;
    }
    if a.n < 3 {
        return Err(format!("parameter `n` = {} too small (need >= 3)", a.n));
    }
    std::fs::create_dir_all(&a.out).map_err(|e| e.to_string())?;
    let spacing = 2.0 / (a.n as f64 - 1.0);
    let mut grid = sample_zero_boundary(a.n, spacing, a.seed).map_err(|e| e.to_string())?;
    if a.alpha != 0.0 || a.beta != 0.0 {
        grid = grid
            .add_singularity(grid.window.center() + Point::new(spacing / 3.0, spacing / 3.0), a.alpha, a.beta)
            .map_err(|e| e.to_string())?;
    }
    let bin = a.out.join("field.bin");
    grid.write_binary(&bin).map_err(|e| e.to_string())?;
    let ppm = a.out.join("field.ppm");
    write_ppm(&ppm, a.n, a.n, &grid_to_gray(&grid)).map_err(|e| e.to_string())?;
    let color = a.out.join("field_diverging.ppm");
    write_ppm(&color, a.n, a.n, &field_to_rgb(&grid.values, a.n)).map_err(|e| e.to_string())?;
    finish_manifest(
        &a.out,
        "gff",
        a.seed,
        serde_json::to_value(&a).unwrap(),
        &[bin, ppm, color],
    )?;
    Ok(())
}

fn cmd_flow(mut a: FlowArgs) -> Result<(), String> {
    if let Some(c) = &a.config {
        let c = c.clone();
        a = load_config(&c)?;
    }
    a.seed = env_seed(a.seed);
    let c = derive_constants(a.kappa).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&a.out).map_err(|e| e.to_string())?;
    let spacing = 2.0 / (a.n as f64 - 1.0);
    let grid = sample_zero_boundary(a.n, spacing, a.seed)
        .map_err(|e| e.to_string())?
        .scaled(field_scale());

    let starts: Vec<Point> = match &a.start {
        Some(s) => {
            let mut it = s.split(',').map(str::trim).map(str::parse::<f64>);
            match (it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(y))) => vec![Point::new(x, y)],
                _ => return Err(format!("parameter `start` = {s:?} is not \"x,y\"")),
            }
        }
        None => {
            use rand::Rng;
            let mut rng = imgeo::rng::stream_rng(a.seed, 0x666c_6f77);
            (0..a.starts)
                .map(|_| Point::new(rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8)))
                .collect()
        }
    };

    let step = spacing;
    let opts = flow::TraceOpts::new(step, (30.0 * grid.window.width() / step) as usize);
    let mut px = grid_to_gray(&grid);
    let mut files = Vec::new();
    for (k, &theta) in a.theta.iter().enumerate() {
        let forest =
            flow::build_forest(&grid, &c, &starts, theta, &opts).map_err(|e| e.to_string())?;
        let lines_path = a.out.join(format!("flow_{k}.csv"));
        write_polyline_csv(&lines_path, &forest.lines).map_err(|e| e.to_string())?;
        let forest_path = a.out.join(format!("forest_{k}.csv"));
        write_forest_csv(&forest_path, &forest).map_err(|e| e.to_string())?;
        let rgb = hue_rgb(theta / (2.0 * PI));
        for line in &forest.lines {
            raster_line(&mut px, a.n, &grid.window, &line.points, rgb);
        }
        files.push(lines_path);
        files.push(forest_path);
    }
    let img = a.out.join("flow.ppm");
    write_ppm(&img, a.n, a.n, &px).map_err(|e| e.to_string())?;
    files.push(img);
    finish_manifest(&a.out, "flow", a.seed, serde_json::to_value(&a).unwrap(), &files)?;
    Ok(())
}

fn cmd_sle(mut a: SleArgs) -> Result<(), String> {
    if let Some(c) = &a.config {
        let c = c.clone();
        a = load_config(&c)?;
    }
    a.seed = env_seed(a.seed);
    let kind = match a.kind.as_str() {
        "chordal" => Kind::Chordal,
        "radial" => Kind::Radial,
        "whole-plane" | "wholeplane" => Kind::WholePlane,
        other => return Err(format!("parameter `kind` = {other:?} unknown")),
    };
    let c = derive_constants(a.kappa).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&a.out).map_err(|e| e.to_string())?;

    let mut spec = DriverSpec::new(kind, a.kappa, 0.0, a.dt, a.horizon, a.seed);
    spec.weights = a
        .rho
        .iter()
        .enumerate()
        .map(|(i, &r)| (r, a.force_point.get(i).copied().unwrap_or(0.0)))
        .collect();
    spec.mu = a.mu;
    spec.t_start = a.t_start;
    if let Some(b) = a.burn_in {
        spec.burn_in = b;
    }
    let driver = match kind {
        Kind::Chordal => drive_chordal(&spec),
        Kind::Radial => drive_radial(&spec),
        Kind::WholePlane => drive_wholeplane(&spec),
    }
    .map_err(|e| e.to_string())?;
    let trace = loewner_trace(&driver, a.stride.max(1)).map_err(|e| e.to_string())?;

    let driver_path = a.out.join("driver.csv");
    write_driver_csv(&driver_path, driver.rows()).map_err(|e| e.to_string())?;
    let trace_path = a.out.join("trace.csv");
    write_trace_csv(
        &trace_path,
        trace.times.iter().copied().zip(trace.points.iter().copied()),
    )
    .map_err(|e| e.to_string())?;
    let mut files = vec![driver_path, trace_path];

    let mut extras = serde_json::Map::new();
    if a.beta_estimate {
        let est = winding_beta_estimate(&trace, &c, 0.0).map_err(|e| e.to_string())?;
        extras.insert("beta_estimate".into(), est.into());
    }
    if let Some(sweep) = &a.twist_sweep {
        let mut rows = Vec::new();
        for tok in sweep.split(',') {
            let eps: f64 = tok
                .trim()
                .parse()
                .map_err(|_| format!("parameter `twist-sweep` entry {tok:?} is not a number"))?;
            let tw = twisting(&driver, &trace, eps).map_err(|e| e.to_string())?;
            rows.push(serde_json::json!({"epsilon": eps, "twist": tw}));
        }
        extras.insert("twisting".into(), rows.into());
    }
    if !extras.is_empty() {
        let est_path = a.out.join("estimates.json");
        std::fs::write(
            &est_path,
            serde_json::to_string_pretty(&serde_json::Value::Object(extras)).unwrap(),
        )
        .map_err(|e| e.to_string())?;
        files.push(est_path);
    }
    finish_manifest(&a.out, "sle", a.seed, serde_json::to_value(&a).unwrap(), &files)?;
    Ok(())
}

fn cmd_spacefill(mut a: SpacefillArgs) -> Result<(), String> {
    if let Some(c) = &a.config {
        let c = c.clone();
        a = load_config(&c)?;
    }
    a.seed = env_seed(a.seed);
    let cfg = SpaceFillConfig::new(a.kappa_prime, a.rho1, a.rho2, a.mesh)
        .map_err(|e| e.to_string())?;
    let c = cfg.dual_constants();
    std::fs::create_dir_all(&a.out).map_err(|e| e.to_string())?;
    let spacing = 2.0 / (a.n as f64 - 1.0);
    let (ba, bb) =
        weights_to_boundary(a.kappa_prime, a.rho1, a.rho2).map_err(|e| e.to_string())?;
    let make = |label: u64, x: f64, y: f64| {
        sample_zero_boundary(a.n, spacing, imgeo::rng::derive_seed(a.seed, label))
            .map_err(|e| e.to_string())?
            .scaled(field_scale())
            .add_harmonic_boundary(&BoundarySpec::left_right(x, y))
            .map_err(|e| e.to_string())
    };
    let grid = make(1, ba, bb)?;
    let order = order_points(&grid, &c, &cfg).map_err(|e| e.to_string())?;
    let curve = space_filling_curve(&order);
    let curve_path = a.out.join("curve.csv");
    write_curve_csv(&curve_path, curve.rows()).map_err(|e| e.to_string())?;

    // time-colored cell image
    let m = a.mesh;
    let mut px = vec![0u8; 3 * m * m];
    for (rank, &p) in order.order.iter().enumerate() {
        let (i, j) = (p % m, p / m);
        let rgb = hue_rgb(0.8 * rank as f64 / order.order.len() as f64);
        let o = 3 * ((m - 1 - j) * m + i);
        px[o..o + 3].copy_from_slice(&rgb);
    }
    let img = a.out.join("spacefill.ppm");
    write_ppm(&img, m, m, &px).map_err(|e| e.to_string())?;
    let mut files = vec![curve_path, img];

    if a.reverse {
        let (r1, r2) =
            reversal_weights(a.kappa_prime, a.rho1, a.rho2).map_err(|e| e.to_string())?;
        let rcfg =
            SpaceFillConfig::new(a.kappa_prime, r1, r2, a.mesh).map_err(|e| e.to_string())?;
        let (ra, rb) = weights_to_boundary(a.kappa_prime, r1, r2).map_err(|e| e.to_string())?;
        let rgrid = make(2, ra, rb)?;
        let rorder = order_points(&rgrid, &c, &rcfg).map_err(|e| e.to_string())?;
        let stat = reversal_symmetry_stat(&order, &rorder).map_err(|e| e.to_string())?;
        let rev_path = a.out.join("reversal.json");
        std::fs::write(
            &rev_path,
            serde_json::to_string_pretty(&serde_json::json!({
                "rho_reversed": [r1, r2],
                "ks_stat": stat,
            }))
            .unwrap(),
        )
        .map_err(|e| e.to_string())?;
        files.push(rev_path);
    }
    finish_manifest(&a.out, "spacefill", a.seed, serde_json::to_value(&a).unwrap(), &files)?;
    Ok(())
}

/// The committed verification presets: sizes chosen so the whole suite runs
/// in a few minutes while every test still passes with margin.
fn run_verify_test(name: &str, seed: u64) -> Result<Vec<TestReport>, String> {
    let r = |x: Result<TestReport, imgeo::Error>| x.map(|t| vec![t]).map_err(|e| e.to_string());
    match name {
        "theta" => Ok(vec![
            stats::test_theta_stationary(2.0, 0.0, 20_000, 1e-3, 30.0, 100, seed)
                .map_err(|e| e.to_string())?,
            stats::test_theta_stationary(3.0, 1.0, 20_000, 1e-3, 30.0, 100, seed + 1)
                .map_err(|e| e.to_string())?,
        ]),
        "merging" => r(stats::test_merging(4.0 / 3.0, 100, 10, 10, seed)),
        "crossing" => {
            let (lo, hi) = stats::crossing_gaps(2.0).map_err(|e| e.to_string())?;
            Ok(vec![
                stats::test_crossing_bound(2.0, lo, 30, seed, true).map_err(|e| e.to_string())?,
                stats::test_crossing_bound(2.0, hi, 30, seed + 1, false)
                    .map_err(|e| e.to_string())?,
            ])
        }
        "multiplicity" => Ok(vec![
            stats::test_multiplicity(8.0 / 3.0, 2.0 - 8.0 / 3.0, 8, seed, false)
                .map_err(|e| e.to_string())?,
            stats::test_multiplicity(3.6, -1.6, 8, seed + 1, true).map_err(|e| e.to_string())?,
        ]),
        "beta" => Ok(vec![
            stats::test_beta_recovery(2.0, 0.0, -1.0, 6, seed).map_err(|e| e.to_string())?,
            stats::test_beta_recovery(2.0, 0.0, 0.0, 6, seed + 1).map_err(|e| e.to_string())?,
            stats::test_beta_recovery(2.0, 0.0, 1.0, 6, seed + 2).map_err(|e| e.to_string())?,
        ]),
        "reversal" => {
            let centered = 6.0 / 4.0 - 2.0;
            r(stats::test_reversal(6.0, centered, centered, 16, 12, seed, true))
        }
        "transience" => Ok(vec![
            stats::test_transience(2.0, 0.0, 20, seed).map_err(|e| e.to_string())?,
            stats::test_transience(3.0, -1.0, 20, seed + 1).map_err(|e| e.to_string())?,
        ]),
        other => Err(format!("unknown test name {other:?}")),
    }
}

const ALL_TESTS: [&str; 7] = [
    "theta",
    "merging",
    "crossing",
    "multiplicity",
    "beta",
    "reversal",
    "transience",
];

fn cmd_verify(mut a: VerifyArgs) -> Result<bool, String> {
    if let Some(c) = &a.config {
        let c = c.clone();
        a = load_config(&c)?;
    }
    a.seed = env_seed(a.seed);
    let selection: Vec<String> = if a.test.is_empty() {
        ALL_TESTS.iter().map(|s| s.to_string()).collect()
    } else {
        a.test.clone()
    };
    for t in &selection {
        if !ALL_TESTS.contains(&t.as_str()) {
            return Err(format!(
                "unknown test name {t:?} (expected one of {})",
                ALL_TESTS.join(", ")
            ));
        }
    }
    std::fs::create_dir_all(&a.out).map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for (k, t) in selection.iter().enumerate() {
        let batch = run_verify_test(t, a.seed.wrapping_add(1000 * k as u64))?;
        for r in &batch {
            println!("{}", r.line());
        }
        reports.extend(batch);
    }
    let all_pass = reports.iter().all(|r| r.verdict);
    let report_path = a.out.join("reports.jsonl");
    stats::write_reports(&report_path, &reports).map_err(|e| e.to_string())?;
    finish_manifest(
        &a.out,
        "verify",
        a.seed,
        serde_json::to_value(&a).unwrap(),
        &[report_path],
    )?;
    println!(
        "{}: {}/{} reports passing (manifest sha {})",
        if all_pass { "OK" } else { "FAILED" },
        reports.iter().filter(|r| r.verdict).count(),
        reports.len(),
        file_sha256(&a.out.join("verify.manifest.json")).map_err(|e| e.to_string())?
    );
    Ok(all_pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Gff(a) => cmd_gff(a).map(|()| true),
        Cmd::Flow(a) => cmd_flow(a).map(|()| true),
        Cmd::Sle(a) => cmd_sle(a).map(|()| true),
        Cmd::Spacefill(a) => cmd_spacefill(a).map(|()| true),
        Cmd::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
