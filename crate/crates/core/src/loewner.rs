//! Driving SDEs for chordal, radial, and whole-plane Loewner evolutions with
//! weight rho, and trace reconstruction by backward composition of exact
//! single-step slit maps.
//!
//! Radial and whole-plane drivers are integrated in angle coordinates: the
//! gap theta = arg W - arg O follows a one-dimensional SDE with drift
//! `((rho+2)/2) cot(theta/2) + kappa mu` and noise `sqrt(kappa)`, while
//! arg O drifts by `-cot(theta/2)` (the unit-circle reduction of the
//! force-point ODE).  Traces use log coordinates `z = e^{iu}`: one slit-map
//! step of capacity dt inverts exactly through
//! `cos(v_pre/2) = e^{dt/2} cos(v_post/2)` with `v = u - w`, branch chosen
//! inside the domain (Im u >= 0 for the disk, <= 0 for the plane exterior).

use crate::rng::stream_rng;
use crate::{Error, Point, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

pub const EPS_COLLISION: f64 = 1e-6;
pub const EPS_ANGLE: f64 = 1e-6;
const BLOWUP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Chordal,
    Radial,
    WholePlane,
}

#[derive(Debug, Clone)]
pub struct DriverSpec {
    pub kind: Kind,
    pub kappa: f64,
    /// (rho, force point).  Chordal: force points on the real line, the sign
    /// of a zero selects the 0+ / 0- side.  Radial/whole-plane: single
    /// weight, force point ignored (the gap starts at `theta0`).
    pub weights: Vec<(f64, f64)>,
    /// Spiraling drift; recovered from traces as the winding rate beta.
    pub mu: f64,
    pub dt: f64,
    pub horizon: f64,
    /// Whole-plane only: capacity time discarded before recording.
    pub burn_in: f64,
    /// Time label of the first recorded sample (whole-plane windows may
    /// start at negative capacity time).
    pub t_start: f64,
    pub theta0: f64,
    pub seed: u64,
}

impl DriverSpec {
    pub fn new(kind: Kind, kappa: f64, rho: f64, dt: f64, horizon: f64, seed: u64) -> Self {
        Self {
            kind,
            kappa,
            weights: vec![(rho, 0.0)],
            mu: 0.0,
            dt,
            horizon,
            burn_in: if kind == Kind::WholePlane { 50.0 } else { 0.0 },
            t_start: 0.0,
            theta0: PI,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::DriverSpec(format!("kappa = {} must be > 0", self.kappa)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::DriverSpec(format!("dt = {} must be > 0", self.dt)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::DriverSpec("horizon must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Driver {
    pub kind: Kind,
    pub kappa: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    /// Driving value; real for chordal (imaginary part 0), unit modulus for
    /// radial/whole-plane.
    pub w: Vec<Point>,
    /// Force-point track (first force point for chordal).
    pub o: Vec<Point>,
    /// Gap angle arg W - arg O in [0, 2 pi]; zero for chordal.
    pub theta: Vec<f64>,
    /// Continuous driver angle arg W (not reduced mod 2 pi); chordal: W.
    pub w_angle: Vec<f64>,
    pub threshold_time: Option<f64>,
    /// Chordal: first time any force point collides with W.
    pub collision_time: Option<f64>,
}

impl Driver {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, Point, Point, f64)> + '_ {
        (0..self.len()).map(|k| (self.times[k], self.w[k], self.o[k], self.theta[k]))
    }
}

/// Euler-Maruyama for the chordal SDE
/// `dW = sqrt(kappa) dB + sum_i rho_i/(W - V_i) dt`, `dV_i = 2/(V_i - W) dt`,
/// with collision distances regularized at `EPS_COLLISION`.  Records stop at
/// the continuation threshold: the first time the summed weight of the
/// force points collapsed onto `W` on one side reaches -2.
pub fn drive_chordal(spec: &DriverSpec) -> Result<Driver> {
    if spec.kind != Kind::Chordal {
        return Err(Error::DriverSpec("drive_chordal requires chordal kind".into()));
    }
    spec.validate()?;
    for side in [false, true] {
        let mut sum = 0.0;
        let mut pts: Vec<(f64, f64)> = spec
            .weights
            .iter()
            .filter(|(_, x)| (x.is_sign_negative()) == side)
            .cloned()
            .collect();
        pts.sort_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap());
        for (rho, x) in pts {
            sum += rho;
            if x.abs() <= EPS_COLLISION && sum <= -2.0 {
                return Err(Error::DriverSpec(format!(
                    "weights at the starting point sum to {sum} <= -2 (immediate threshold)"
                )));
            }
        }
    }

    let n = (spec.horizon / spec.dt).round() as usize;
    let mut rng = stream_rng(spec.seed, 0x6c6f_6577);
    let sqk = spec.kappa.sqrt();
    let mut w = 0.0f64;
    // each force point keeps its side of W; a zero start selects 0+/0- by
    // the sign of the zero
    let side: Vec<f64> = spec
        .weights
        .iter()
        .map(|&(_, x)| if x.is_sign_negative() { -1.0 } else { 1.0 })
        .collect();
    let mut v: Vec<f64> = spec
        .weights
        .iter()
        .zip(&side)
        .map(|(&(_, x), &s)| if x == 0.0 { s * EPS_COLLISION } else { x })
        .collect();
    let mut collided = vec![false; v.len()];

    let mut out = Driver {
        kind: Kind::Chordal,
        kappa: spec.kappa,
        dt: spec.dt,
        times: Vec::with_capacity(n + 1),
        w: Vec::with_capacity(n + 1),
        o: Vec::with_capacity(n + 1),
        theta: Vec::with_capacity(n + 1),
        w_angle: Vec::with_capacity(n + 1),
        threshold_time: None,
        collision_time: None,
    };
    let mut record = |t: f64, w: f64, v0: f64| {
        out.times.push(t);
        out.w.push(Point::new(w, 0.0));
        out.o.push(Point::new(v0, 0.0));
        out.theta.push(0.0);
        out.w_angle.push(w);
    };
    record(0.0, w, v.first().copied().unwrap_or(0.0));

    for k in 0..n {
        let t = (k + 1) as f64 * spec.dt;
        let mut drift = 0.0;
        for (i, &(rho, _)) in spec.weights.iter().enumerate() {
            let gap = (w - v[i]).abs().max(EPS_COLLISION) * (-side[i]);
            drift += rho / gap;
        }
        let db: f64 = rng.sample(StandardNormal);
        let w_new = w + drift * spec.dt + sqk * spec.dt.sqrt() * db;
        for (i, vi) in v.iter_mut().enumerate() {
            // the signed gap X = side*(V - W) follows
            // dX = (2 + rho)/X dt - side sqrt(kappa) dB; the singular drift
            // is resolved implicitly (X = Y + (2+rho) dt / X), which keeps
            // X > 0 whenever the continuum process stays positive and lets
            // a genuine collision show up as a vanishing discriminant
            let rho = spec.weights[i].0;
            let x = (*vi - w) * side[i];
            let y = x - side[i] * sqk * spec.dt.sqrt() * db;
            let disc = y * y + 4.0 * (2.0 + rho) * spec.dt;
            let x_new = if disc >= 0.0 {
                (y + disc.sqrt()) / 2.0
            } else {
                0.0
            };
            let x_new = if x_new <= EPS_COLLISION {
                if !collided[i] {
                    collided[i] = true;
                    out.collision_time.get_or_insert(t);
                }
                EPS_COLLISION
            } else {
                x_new
            };
            *vi = w_new + side[i] * x_new;
        }
        w = w_new;
        record(t, w, v.first().copied().unwrap_or(0.0));

        // continuation threshold: per side, summed weight of the force
        // points currently collapsed onto W
        for s in [-1.0, 1.0] {
            let attached = |i: usize| side[i] == s && (v[i] - w).abs() <= 1.5 * EPS_COLLISION;
            let sum: f64 = (0..v.len())
                .filter(|&i| attached(i))
                .map(|i| spec.weights[i].0)
                .sum();
            if (0..v.len()).any(attached) && sum <= -2.0 {
                out.threshold_time = Some(t);
            }
        }
        if out.threshold_time.is_some() {
            break;
        }
    }
    Ok(out)
}

fn cot_half(theta: f64) -> f64 {
    let t = theta.clamp(EPS_ANGLE, 2.0 * PI - EPS_ANGLE);
    (t / 2.0).tan().recip()
}

/// Exact flow of `theta' = a cot(theta/2)` for time `h`: the substitution
/// `c = cos(theta/2)` linearizes the ODE to `c' = -(a/2) c`.  Returns the
/// new angle; stays in [0, 2 pi] without any clamping for a > 0.
fn drift_flow(theta: f64, a: f64, h: f64) -> f64 {
    let c = ((theta / 2.0).cos() * (-a * h / 2.0).exp()).clamp(-1.0, 1.0);
    2.0 * c.acos()
}

/// Integrate the gap SDE and arg O from `theta0` for `steps` steps; returns
/// (theta path, phi path) including the initial state.
///
/// Strang splitting: the singular `cot(theta/2)` drift is integrated exactly
/// (half step, noise + spiral drift, half step), so the scheme is stable
/// arbitrarily close to the boundary; the noise step reflects at {0, 2 pi}.
/// The arg O increment uses `int cot(theta/2) dt = delta_theta / a` along
/// the exact drift flow.
fn integrate_theta(
    kappa: f64,
    rho: f64,
    mu: f64,
    dt: f64,
    steps: usize,
    theta0: f64,
    phi0: f64,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sqk = kappa.sqrt();
    let a = (rho + 2.0) / 2.0;
    let mut theta = theta0;
    let mut phi = phi0;
    let mut thetas = Vec::with_capacity(steps + 1);
    let mut phis = Vec::with_capacity(steps + 1);
    thetas.push(theta);
    phis.push(phi);
    for _ in 0..steps {
        let mut dphi = 0.0;
        let mut half = |theta: f64| -> f64 {
            if a == 0.0 {
                dphi += -cot_half(theta) * dt / 2.0;
                theta
            } else {
                let next = drift_flow(theta, a, dt / 2.0);
                dphi += -(next - theta) / a;
                next
            }
        };
        theta = half(theta);
        let db: f64 = rng.sample(StandardNormal);
        let dtheta = kappa * mu * dt + sqk * dt.sqrt() * db;
        if dtheta.abs() > PI / 4.0 {
            return Err(Error::Stability(format!(
                "theta step {dtheta:.3} exceeds pi/4; decrease dt"
            )));
        }
        theta += dtheta;
        // reflection at the endpoints keeps theta in [0, 2 pi]
        theta = theta.abs();
        theta = 2.0 * PI - (2.0 * PI - theta).abs();
        theta = half(theta);
        phi += dphi;
        thetas.push(theta);
        phis.push(phi);
    }
    Ok((thetas, phis))
}

/// Radial driver: `W = O e^{i theta}` on the unit circle, gap SDE with
/// reflection at {0, 2 pi}.
pub fn drive_radial(spec: &DriverSpec) -> Result<Driver> {
    if spec.kind != Kind::Radial {
        return Err(Error::DriverSpec("drive_radial requires radial kind".into()));
    }
    spec.validate()?;
    if spec.weights.len() != 1 {
        return Err(Error::DriverSpec("radial driver takes a single weight".into()));
    }
    let rho = spec.weights[0].0;
    let n = (spec.horizon / spec.dt).round() as usize;
    let mut rng = stream_rng(spec.seed, 0x7261_6400);
    let (thetas, phis) =
        integrate_theta(spec.kappa, rho, spec.mu, spec.dt, n, spec.theta0, 0.0, &mut rng)?;
    Ok(pack_circle_driver(
        Kind::Radial,
        spec,
        spec.t_start,
        &thetas,
        &phis,
    ))
}

/// Whole-plane driver: run the radial gap SDE for `burn_in` capacity units
/// from an arbitrary initial state, discard, then record `[t_start,
/// t_start + horizon]` as the stationarity surrogate.
pub fn drive_wholeplane(spec: &DriverSpec) -> Result<Driver> {
    if spec.kind != Kind::WholePlane {
        return Err(Error::DriverSpec("drive_wholeplane requires whole_plane kind".into()));
    }
    spec.validate()?;
    if !(spec.burn_in > 0.0) {
        return Err(Error::DriverSpec(
            "whole-plane burn_in must be > 0 (stationarity is approximated by burn-in)".into(),
        ));
    }
    if spec.weights.len() != 1 {
        return Err(Error::DriverSpec("whole-plane driver takes a single weight".into()));
    }
    let rho = spec.weights[0].0;
    let burn = (spec.burn_in / spec.dt).round() as usize;
    let n = (spec.horizon / spec.dt).round() as usize;
    let mut rng = stream_rng(spec.seed, 0x7770_6c00);
    let (thetas, phis) = integrate_theta(
        spec.kappa,
        rho,
        spec.mu,
        spec.dt,
        burn + n,
        spec.theta0,
        0.0,
        &mut rng,
    )?;
    Ok(pack_circle_driver(
        Kind::WholePlane,
        spec,
        spec.t_start,
        &thetas[burn..],
        &phis[burn..],
    ))
}

fn pack_circle_driver(
    kind: Kind,
    spec: &DriverSpec,
    t0: f64,
    thetas: &[f64],
    phis: &[f64],
) -> Driver {
    let n = thetas.len();
    let mut d = Driver {
        kind,
        kappa: spec.kappa,
        dt: spec.dt,
        times: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        o: Vec::with_capacity(n),
        theta: Vec::with_capacity(n),
        w_angle: Vec::with_capacity(n),
        threshold_time: None,
        collision_time: None,
    };
    let unit = |angle: f64| {
        let p = Point::from_polar(1.0, angle);
        p / p.norm()
    };
    for k in 0..n {
        d.times.push(t0 + k as f64 * spec.dt);
        d.o.push(unit(phis[k]));
        d.w.push(unit(phis[k] + thetas[k]));
        d.theta.push(thetas[k]);
        d.w_angle.push(phis[k] + thetas[k]);
    }
    d
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    /// Capacity parameterization (always true for reconstructed traces).
    pub capacity: bool,
}

/// One inverse slit-map step in log coordinates: given the image gap
/// `v_post = u - w_k`, solve `cos(v_pre/2) = e^{dt/2} cos(v_post/2)` on the
/// branch with the prescribed sign of Im.
fn inverse_step(v_post: Complex64, dt: f64, im_sign: f64) -> Complex64 {
    let c = (v_post / 2.0).cos() * (dt / 2.0).exp();
    let mut v = c.acos() * 2.0;
    if v.im * im_sign < 0.0 {
        v = -v;
    }
    v
}

/// Tip of the hull at each recorded time: backward composition of the exact
/// per-step inverse maps from the driving point.  `stride` thins the output
/// (tip m is emitted for every stride-th index plus the final one).
pub fn loewner_trace(driver: &Driver, stride: usize) -> Result<Trace> {
    let stride = stride.max(1);
    let n = driver.len();
    if n == 0 {
        return Err(Error::DriverSpec("empty driver".into()));
    }
    let mut times = Vec::new();
    let mut points = Vec::new();
    let im_sign = match driver.kind {
        Kind::Chordal => 1.0,
        Kind::Radial => 1.0,
        Kind::WholePlane => -1.0,
    };
    // whole-plane: the initial hull is approximated by a disk of radius
    // e^{t_start}, so reconstructed moduli carry that scale
    let scale = match driver.kind {
        Kind::WholePlane => driver.times[0].exp(),
        _ => 1.0,
    };
    for m in (0..n).filter(|m| m % stride == 0 || *m == n - 1) {
        let p = match driver.kind {
            Kind::Chordal => {
                let mut z = Complex64::new(driver.w[m].re, 0.0);
                for k in (0..m).rev() {
                    let wk = driver.w[k].re;
                    let mut s = ((z - wk) * (z - wk) - 4.0 * driver.dt).sqrt();
                    if s.im < 0.0 {
                        s = -s;
                    }
                    z = wk + s;
                    if z.norm() > BLOWUP {
                        return Err(Error::Instability {
                            step: k,
                            magnitude: z.norm(),
                        });
                    }
                }
                z
            }
            Kind::Radial | Kind::WholePlane => {
                let mut u = Complex64::new(driver.w_angle[m], 0.0);
                for k in (0..m).rev() {
                    let v_post = u - driver.w_angle[k];
                    let v_pre = inverse_step(v_post, driver.dt, im_sign);
                    u = driver.w_angle[k] + v_pre;
                    if u.im.abs() > 700.0 {
                        return Err(Error::Instability {
                            step: k,
                            magnitude: u.im.abs().exp(),
                        });
                    }
                }
                (Complex64::i() * u).exp() * scale
            }
        };
        if !p.re.is_finite() || !p.im.is_finite() || p.norm() > BLOWUP {
            return Err(Error::Instability {
                step: m,
                magnitude: p.norm(),
            });
        }
        times.push(driver.times[m]);
        points.push(p);
    }
    Ok(Trace {
        times,
        points,
        capacity: true,
    })
}

/// Cumulative winding angle (continuous arg about the origin) per trace
/// point, unwrapped along the polyline.
pub fn unwrapped_arg(points: &[Point]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = points.first().map_or(0.0, |p| p.im.atan2(p.re));
    out.push(acc);
    for w in points.windows(2) {
        let da = (w[1] / w[0]).im.atan2((w[1] / w[0]).re);
        acc += da;
        out.push(acc);
    }
    out
}

/// Estimate the spiraling rate beta from the winding of a whole-plane trace:
/// `2 pi (chi + alpha)` times the least-squares slope of the net winding
/// count against log radius, over the dyadic exit radii of the trace.
pub fn winding_beta_estimate(trace: &Trace, c: &crate::params::Constants, alpha: f64) -> Result<f64> {
    let radii: Vec<f64> = trace.points.iter().map(|p| p.norm()).collect();
    let r_lo = radii.first().copied().unwrap_or(0.0);
    let r_hi = radii.iter().cloned().fold(0.0f64, f64::max);
    if !(r_lo > 0.0) || (r_hi / r_lo).ln() < 3.0 {
        return Err(Error::Range(format!(
            "radial range e^{:.2} < e^3",
            (r_hi / r_lo.max(1e-300)).ln()
        )));
    }
    let args = unwrapped_arg(&trace.points);
    // first-exit index for each of ~20 log-spaced radius levels
    let levels = 20usize;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for l in 0..levels {
        let r = r_lo * ((l as f64 + 0.5) / levels as f64 * (r_hi / r_lo).ln()).exp();
        if let Some(i) = radii.iter().position(|&ri| ri >= r) {
            xs.push(r.ln());
            ys.push(((args[i] - args[0]) / (2.0 * PI)).floor());
        }
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Range("degenerate radius levels".into()));
    }
    Ok(2.0 * PI * (c.chi + alpha) * (sxy / sxx))
}

/// Twisting of a radial trace upon first reaching modulus `epsilon`: the
/// branch-continued `arg((g^{-1})')` accumulated through the composed
/// slit-map derivatives along the tip's backward chain.
pub fn twisting(driver: &Driver, trace: &Trace, epsilon: f64) -> Result<f64> {
    if driver.kind != Kind::Radial {
        return Err(Error::DriverSpec("twisting requires a radial driver".into()));
    }
    let hit = trace
        .points
        .iter()
        .position(|p| p.norm() <= epsilon)
        .ok_or_else(|| Error::Range(format!("trace never reaches modulus {epsilon}")))?;
    let t_hit = trace.times[hit];
    let m = driver
        .times
        .iter()
        .position(|&t| t >= t_hit)
        .unwrap_or(driver.len() - 1);
    let mut u = Complex64::new(driver.w_angle[m], 0.0);
    let mut twist = 0.0;
    for k in (0..m).rev() {
        let v_post = u - driver.w_angle[k];
        let v_pre = inverse_step(v_post, driver.dt, 1.0);
        // derivative of the inverse step in z-coordinates:
        // e^{i(u_pre - u_post)} * e^{dt/2} sin(v_post/2)/sin(v_pre/2)
        twist += v_pre.re - v_post.re;
        let ratio = (v_post / 2.0).sin() / (v_pre / 2.0).sin();
        twist += ratio.im.atan2(ratio.re);
        u = driver.w_angle[k] + v_pre;
    }
    Ok(twist)
}

/// Decorrelated gap-angle samples: burn in from the mid-gap state, then
/// record theta every `stride` steps.  Runs in chunks so long records do not
/// hold the whole path in memory.
pub fn theta_samples(
    kappa: f64,
    rho: f64,
    mu: f64,
    dt: f64,
    burn_in: f64,
    stride: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if stride == 0 {
        return Err(Error::DriverSpec("stride must be positive".into()));
    }
    let mut rng = stream_rng(seed, 0x7468_6574);
    let burn = ((burn_in / dt).round() as usize).max(1);
    let (t0, _) = integrate_theta(kappa, rho, mu, dt, burn, PI, 0.0, &mut rng)?;
    let mut theta = *t0.last().unwrap();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (ts, _) = integrate_theta(kappa, rho, mu, dt, stride, theta, 0.0, &mut rng)?;
        theta = *ts.last().unwrap();
        out.push(theta);
    }
    Ok(out)
}

/// Stationary density of the gap SDE at mu = 0, unnormalized:
/// `sin^{2(rho+2)/kappa}(theta/2)` on (0, 2 pi).
pub fn theta_stationary_density(kappa: f64, rho: f64, theta: f64) -> f64 {
    (theta / 2.0).sin().abs().powf(2.0 * (rho + 2.0) / kappa)
}

/// CDF of the stationary gap density by Simpson integration on a fixed grid.
pub fn theta_stationary_cdf(kappa: f64, rho: f64) -> impl Fn(f64) -> f64 {
    let n = 4096usize;
    let h = 2.0 * PI / n as f64;
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for i in 0..n {
        let a = i as f64 * h;
        let f0 = theta_stationary_density(kappa, rho, a);
        let fm = theta_stationary_density(kappa, rho, a + h / 2.0);
        let f1 = theta_stationary_density(kappa, rho, a + h);
        acc += h / 6.0 * (f0 + 4.0 * fm + f1);
        cum.push(acc);
    }
    let total = acc;
    move |theta: f64| {
        let x = (theta / h).clamp(0.0, n as f64);
        let i = (x.floor() as usize).min(n - 1);
        let frac = x - i as f64;
        ((cum[i] + frac * (cum[i + 1] - cum[i])) / total).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_constants;

    #[test]
    fn chordal_zero_weight_is_scaled_brownian() {
        let horizon = 1.0;
        let kappa = 3.0;
        let runs = 1000;
        let mut finals = Vec::with_capacity(runs);
        for seed in 0..runs as u64 {
            let spec = DriverSpec::new(Kind::Chordal, kappa, 0.0, 1e-3, horizon, seed);
            let d = drive_chordal(&spec).unwrap();
            finals.push(d.w.last().unwrap().re);
        }
        let mean = finals.iter().sum::<f64>() / runs as f64;
        let var = finals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / runs as f64;
        // Var(sample variance) ~ 2 (kappa T)^2 / n
        let sigma = (2.0 / runs as f64).sqrt() * kappa * horizon;
        assert!(
            (var - kappa * horizon).abs() < 3.0 * sigma,
            "var = {var}, expect {}",
            kappa * horizon
        );
    }

    #[test]
    fn chordal_collision_behavior_matches_bessel_dimension() {
        // rho = kappa - 4 at kappa = 2: dimension 1 => collision certain;
        // the continuation threshold fires
        let mut hits = 0;
        for seed in 0..20u64 {
            let mut spec = DriverSpec::new(Kind::Chordal, 2.0, -2.0, 1e-4, 2.0, seed);
            spec.weights[0].1 = 0.1;
            let d = drive_chordal(&spec).unwrap();
            if d.threshold_time.is_some() {
                hits += 1;
            }
        }
        assert!(hits >= 18, "only {hits}/20 runs hit the threshold");

        // rho = kappa/2 - 2 = -1: dimension 2, no collision recorded
        let mut collisions = 0;
        for seed in 0..100u64 {
            let mut spec = DriverSpec::new(Kind::Chordal, 2.0, -1.0, 1e-4, 1.0, seed);
            spec.weights[0].1 = 0.1;
            let d = drive_chordal(&spec).unwrap();
            if d.collision_time.is_some() {
                collisions += 1;
            }
        }
        assert!(collisions <= 1, "{collisions}/100 runs collided at the critical weight");
    }

    #[test]
    fn immediate_threshold_is_a_spec_error() {
        let spec = DriverSpec::new(Kind::Chordal, 2.0, -2.5, 1e-3, 1.0, 0);
        assert!(drive_chordal(&spec).is_err());
    }

    #[test]
    fn radial_modulus_is_exactly_one() {
        let spec = DriverSpec::new(Kind::Radial, 2.0, 0.0, 1e-3, 2.0, 5);
        let d = drive_radial(&spec).unwrap();
        for k in 0..d.len() {
            assert!((d.w[k].norm() - 1.0).abs() < 1e-15);
            assert!((d.o[k].norm() - 1.0).abs() < 1e-15);
            assert!((0.0..=2.0 * PI).contains(&d.theta[k]));
        }
    }

    #[test]
    fn radial_symmetric_start_keeps_mean_at_pi() {
        let runs = 400;
        let mut sum = 0.0;
        for seed in 0..runs as u64 {
            let spec = DriverSpec::new(Kind::Radial, 2.0, 0.0, 1e-3, 1.0, seed);
            let d = drive_radial(&spec).unwrap();
            sum += d.theta.last().unwrap();
        }
        let mean = sum / runs as f64;
        // theta_T has variance <= kappa*T + drift effects; generous 3 sigma
        let sigma = (2.0f64).sqrt() / (runs as f64).sqrt() * 2.0;
        assert!((mean - PI).abs() < 3.0 * sigma, "mean = {mean}");
    }

    #[test]
    fn wholeplane_requires_burn_in_and_forgets_initial_state() {
        let mut spec = DriverSpec::new(Kind::WholePlane, 2.0, 0.0, 1e-3, 1.0, 9);
        spec.burn_in = 0.0;
        assert!(drive_wholeplane(&spec).is_err());
        // synchronous coupling: same noise, different theta0
        let mut a = DriverSpec::new(Kind::WholePlane, 2.0, 0.0, 1e-3, 1.0, 9);
        a.burn_in = 50.0;
        a.theta0 = 0.4;
        let mut b = a.clone();
        b.theta0 = 5.6;
        let da = drive_wholeplane(&a).unwrap();
        let db = drive_wholeplane(&b).unwrap();
        for k in 0..da.len() {
            assert!(
                (da.theta[k] - db.theta[k]).abs() < 1e-6,
                "theta gap {} at step {k}",
                (da.theta[k] - db.theta[k]).abs()
            );
        }
    }

    #[test]
    fn spiral_drift_sign_shows_in_arg_w() {
        let run = |mu: f64| {
            let mut spec = DriverSpec::new(Kind::WholePlane, 2.0, 0.0, 1e-3, 2.0, 12);
            spec.mu = mu;
            let d = drive_wholeplane(&spec).unwrap();
            d.w_angle.last().unwrap() - d.w_angle.first().unwrap()
        };
        assert!(run(2.0) > run(0.0));
        assert!(run(-2.0) < run(0.0));
    }

    #[test]
    fn constant_driver_matches_closed_form_radial_slit() {
        // constant driver: hull is a radial slit; the capacity of a slit
        // with inner endpoint r is e^t = (1+r)^2/(4r)
        let n = 2000;
        let dt = 1e-3;
        let mut d = Driver {
            kind: Kind::Radial,
            kappa: 1.0,
            dt,
            times: (0..=n).map(|k| k as f64 * dt).collect(),
            w: vec![Point::new(1.0, 0.0); n + 1],
            o: vec![Point::new(1.0, 0.0); n + 1],
            theta: vec![0.0; n + 1],
            w_angle: vec![0.0; n + 1],
            threshold_time: None,
            collision_time: None,
        };
        d.w = vec![Point::new(1.0, 0.0); n + 1];
        let trace = loewner_trace(&d, 100).unwrap();
        for (t, p) in trace.times.iter().zip(&trace.points).skip(1) {
            assert!(p.im.abs() < 1e-9, "tip off the radius: {p}");
            let r = p.re;
            let cap = ((1.0 + r) * (1.0 + r) / (4.0 * r)).ln();
            assert!((cap - t).abs() < 1e-6, "capacity {cap} vs t {t}");
        }
    }

    #[test]
    fn conformal_radius_shrinks_as_exp_minus_t() {
        // noise off: kappa small surrogate; measure |(g_t^{-1})'(0)| by a
        // finite difference of the inverse composition near 0
        let spec = DriverSpec::new(Kind::Radial, 1e-8, 0.0, 1e-3, 1.0, 3);
        let d = drive_radial(&spec).unwrap();
        let m = d.len() - 1;
        let t = d.times[m];
        let probe = |z: Complex64| {
            // u = -i log z
            let mut u = z.ln() * Complex64::new(0.0, -1.0);
            for k in (0..m).rev() {
                let v_post = u - d.w_angle[k];
                let v_pre = inverse_step(v_post, d.dt, 1.0);
                u = d.w_angle[k] + v_pre;
            }
            (Complex64::i() * u).exp()
        };
        let eps = 1e-4;
        let deriv = (probe(Complex64::new(eps, 0.0)) - probe(Complex64::new(-eps, 0.0)))
            / Complex64::new(2.0 * eps, 0.0);
        let cr = deriv.norm();
        assert!(
            (cr - (-t).exp()).abs() < 0.01 * (-t).exp(),
            "conformal radius {cr} vs e^-t {}",
            (-t).exp()
        );
    }

    #[test]
    fn wholeplane_trace_koebe_bound() {
        let mut spec = DriverSpec::new(Kind::WholePlane, 8.0 / 3.0, 2.0 - 8.0 / 3.0, 1e-3, 2.0, 7);
        spec.t_start = 0.0;
        let d = drive_wholeplane(&spec).unwrap();
        let trace = loewner_trace(&d, 50).unwrap();
        for (t, p) in trace.times.iter().zip(&trace.points) {
            let ratio = p.norm() / t.exp();
            assert!(
                (1.0 / 8.0..=8.0).contains(&ratio),
                "modulus {} vs e^t {} at t = {t}",
                p.norm(),
                t.exp()
            );
        }
    }

    #[test]
    fn archimedean_spiral_beta_is_winding_rate() {
        // one full turn per factor e of radius
        let c = derive_constants(2.0).unwrap();
        let pts: Vec<Point> = (0..4000)
            .map(|k| {
                let phi = k as f64 * 0.01;
                Point::from_polar((phi / (2.0 * PI)).exp(), phi)
            })
            .collect();
        let trace = Trace {
            times: (0..pts.len()).map(|k| k as f64).collect(),
            points: pts,
            capacity: false,
        };
        let est = winding_beta_estimate(&trace, &c, 0.0).unwrap();
        let expect = 2.0 * PI * c.chi;
        assert!(
            (est - expect).abs() < 0.15 * expect.abs(),
            "estimate {est} vs {expect}"
        );
    }

    #[test]
    fn beta_estimate_needs_radial_range() {
        let c = derive_constants(2.0).unwrap();
        let pts: Vec<Point> = (0..100)
            .map(|k| Point::from_polar(1.0 + k as f64 * 0.01, 0.0))
            .collect();
        let trace = Trace {
            times: (0..100).map(|k| k as f64).collect(),
            points: pts,
            capacity: false,
        };
        assert!(matches!(
            winding_beta_estimate(&trace, &c, 0.0),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn constant_driver_has_bounded_twisting() {
        let n = 4000;
        let dt = 1e-3;
        let d = Driver {
            kind: Kind::Radial,
            kappa: 1.0,
            dt,
            times: (0..=n).map(|k| k as f64 * dt).collect(),
            w: vec![Point::new(1.0, 0.0); n + 1],
            o: vec![Point::new(1.0, 0.0); n + 1],
            theta: vec![0.0; n + 1],
            w_angle: vec![0.0; n + 1],
            threshold_time: None,
            collision_time: None,
        };
        let trace = loewner_trace(&d, 20).unwrap();
        for eps in [0.5, 0.3, 0.2] {
            let tw = twisting(&d, &trace, eps).unwrap();
            assert!(tw.abs() < 3.0, "twist {tw} at eps {eps}");
        }
    }

    #[test]
    fn rotating_driver_twisting_tracks_trace_winding() {
        // uniformly rotating driving point produces a spiral; the twisting
        // stays within an eps-independent constant of 2 pi N_eps
        let n = 6000;
        let dt = 1e-3;
        let omega = 4.0;
        let d = Driver {
            kind: Kind::Radial,
            kappa: 1.0,
            dt,
            times: (0..=n).map(|k| k as f64 * dt).collect(),
            w: (0..=n)
                .map(|k| Point::from_polar(1.0, omega * k as f64 * dt))
                .collect(),
            o: vec![Point::new(1.0, 0.0); n + 1],
            theta: vec![0.0; n + 1],
            w_angle: (0..=n).map(|k| omega * k as f64 * dt).collect(),
            threshold_time: None,
            collision_time: None,
        };
        let trace = loewner_trace(&d, 10).unwrap();
        for eps in [0.4, 0.25] {
            let hit = trace.points.iter().position(|p| p.norm() <= eps).unwrap();
            let args = unwrapped_arg(&trace.points[..=hit]);
            let n_eps = ((args[hit] - args[0]) / (2.0 * PI)).floor();
            let tw = twisting(&d, &trace, eps).unwrap();
            assert!(
                (2.0 * PI * n_eps - tw).abs() < 10.0,
                "2 pi N = {}, twist = {tw} at eps {eps}",
                2.0 * PI * n_eps
            );
        }
    }

    #[test]
    fn stationary_cdf_is_symmetric_at_zero_weight() {
        // rho = 0, kappa arbitrary: density sin^{4/kappa}(theta/2) symmetric
        // about pi
        let cdf = theta_stationary_cdf(2.0, 0.0);
        assert!((cdf(PI) - 0.5).abs() < 1e-6);
        assert!((cdf(1.0) + cdf(2.0 * PI - 1.0) - 1.0).abs() < 1e-6);
        assert!(cdf(0.0) < 1e-9);
        assert!((cdf(2.0 * PI) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coarse_dt_triggers_stability_error() {
        let spec = DriverSpec::new(Kind::Radial, 64.0, 0.0, 0.5, 5.0, 1);
        assert!(matches!(drive_radial(&spec), Err(Error::Stability(_))));
    }
}
