//! Discrete Gaussian free field on a triangulated square grid.
//!
//! Zero-boundary samples are synthesized spectrally: the interior of the grid
//! Laplacian diagonalizes in the product sine basis, so a field with
//! covariance exactly equal to the discrete Green's function is obtained by
//! scaling i.i.d. normals with the inverse square-root eigenvalues and
//! applying the sine synthesis on both axes.  The same solver provides the
//! discrete-harmonic extension of piecewise-constant boundary data.
//!
//! A completed grid is immutable; evaluation is piecewise linear on the two
//! triangles of each cell (diagonal from the lower-left to the upper-right
//! corner), so it is continuous across edges and exact at vertices.

use crate::rng::stream_rng;
use crate::{Error, Point, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read as _, Write as _};
use std::path::Path;

/// Axis-aligned rectangle in plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Window {
    pub fn contains(&self, p: Point) -> bool {
        p.re >= self.x0 && p.re <= self.x1 && p.im >= self.y0 && p.im <= self.y1
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Conical singularity `- alpha*arg(. - center) - beta*log|. - center|`
/// with the branch cut of `arg` on `(-inf, 0) + center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub center: Point,
    pub alpha: f64,
    pub beta: f64,
}

impl Singularity {
    /// Branch-cut bookkeeping for a straight move from `p` to `q`:
    /// +1 when the segment crosses the cut from above, -1 from below,
    /// 0 otherwise.  The continuous argument along a path is
    /// `principal_arg + 2*pi*k` with `k` summed over these jumps.
    pub fn cut_jump(&self, p: Point, q: Point) -> i32 {
        let a = p - self.center;
        let b = q - self.center;
        if a.im == 0.0 && b.im == 0.0 {
            return 0;
        }
        let (above, below) = (a.im > 0.0 && b.im <= 0.0, a.im <= 0.0 && b.im > 0.0);
        if !above && !below {
            return 0;
        }
        let t = a.im / (a.im - b.im);
        let x = a.re + t * (b.re - a.re);
        if x >= 0.0 {
            return 0;
        }
        if above {
            1
        } else {
            -1
        }
    }

    /// The singular additive term at `p` with the principal branch.
    pub fn term(&self, p: Point) -> f64 {
        let d = p - self.center;
        -self.alpha * d.im.atan2(d.re) - self.beta * d.norm().ln()
    }
}

/// Piecewise-linear scalar field on an n x n vertex grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub n: usize,
    pub spacing: f64,
    /// Row-major vertex values; index `j*n + i` is vertex (i, j), i along x.
    pub values: Vec<f64>,
    pub window: Window,
    pub singularity: Option<Singularity>,
    pub seed: u64,
}

/// Piecewise-constant boundary data: arcs are half-open perimeter-fraction
/// intervals `[from, to)` in [0,1), counterclockwise from the lower-left
/// corner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub arcs: Vec<(f64, f64, f64)>, // (from, to, value)
}

impl BoundarySpec {
    pub fn constant(value: f64) -> Self {
        Self {
            arcs: vec![(0.0, 1.0, value)],
        }
    }

    /// `a` on the left half of the perimeter, `b` on the right half, split
    /// along the vertical midline (strip-style data on a square window).
    ///
    /// Counterclockwise from the lower-left corner the perimeter runs
    /// bottom, right, top, left; the bottom and top edges are split at
    /// their midpoints.
    pub fn left_right(a: f64, b: f64) -> Self {
        Self {
            arcs: vec![
                (0.0, 0.125, a),
                (0.125, 0.375, b),
                (0.375, 0.625, b),
                (0.625, 0.875, a),
                (0.875, 1.0, a),
            ],
        }
    }

    fn value_at(&self, frac: f64) -> Option<f64> {
        self.arcs
            .iter()
            .find(|(s, e, _)| frac >= *s && frac < *e)
            .map(|(_, _, v)| *v)
    }
}

/// Sine synthesis on both axes: B = S * A * S with
/// S[i][j] = sin((i+1)(j+1) pi / (m+1)), m x m.
fn sine_both_axes(m: usize, a: &[f64]) -> Vec<f64> {
    let mm1 = (m + 1) as f64;
    let mut s = vec![0.0f64; m * m];
    for i in 0..m {
        for j in 0..m {
            s[i * m + j] = ((i + 1) as f64 * (j + 1) as f64 * PI / mm1).sin();
        }
    }
    // t = S * a
    let mut t = vec![0.0f64; m * m];
    for i in 0..m {
        for k in 0..m {
            let sik = s[i * m + k];
            if sik == 0.0 {
                continue;
            }
            let row = &a[k * m..(k + 1) * m];
            let out = &mut t[i * m..(i + 1) * m];
            for j in 0..m {
                out[j] += sik * row[j];
            }
        }
    }
    // b = t * S  (S symmetric)
    let mut b = vec![0.0f64; m * m];
    for i in 0..m {
        let row = &t[i * m..(i + 1) * m];
        let out = &mut b[i * m..(i + 1) * m];
        for k in 0..m {
            let v = row[k];
            if v == 0.0 {
                continue;
            }
            let srow = &s[k * m..(k + 1) * m];
            for j in 0..m {
                out[j] += v * srow[j];
            }
        }
    }
    b
}

/// Eigenvalue of the (negative) 5-point grid Laplacian for sine mode (j, k),
/// zero-based mode indices.
fn laplacian_eigenvalue(m: usize, j: usize, k: usize) -> f64 {
    let mm1 = (m + 1) as f64;
    4.0 - 2.0 * ((j + 1) as f64 * PI / mm1).cos() - 2.0 * ((k + 1) as f64 * PI / mm1).cos()
}

/// Solve the interior Dirichlet problem `-Lap u = rhs` (zero boundary) on the
/// m x m interior by sine diagonalization.
pub fn poisson_solve(m: usize, rhs: &[f64]) -> Vec<f64> {
    assert_eq!(rhs.len(), m * m);
    let mm1 = (m + 1) as f64;
    let mut hat = sine_both_axes(m, rhs);
    let norm = (2.0 / mm1) * (2.0 / mm1);
    for j in 0..m {
        for k in 0..m {
            hat[j * m + k] *= norm / laplacian_eigenvalue(m, j, k);
        }
    }
    sine_both_axes(m, &hat)
}

/// Sample a zero-boundary discrete GFF; covariance is exactly the Green's
/// function of the grid Laplacian with zero boundary, deterministic in `seed`.
pub fn sample_zero_boundary(n: usize, spacing: f64, seed: u64) -> Result<FieldGrid> {
    if n < 3 {
        return Err(Error::Domain {
            name: "n",
            reason: format!("{n} < 3"),
        });
    }
    if !(spacing > 0.0) {
        return Err(Error::Domain {
            name: "spacing",
            reason: format!("{spacing} <= 0"),
        });
    }
    let m = n - 2;
    let mm1 = (m + 1) as f64;
    let mut rng = stream_rng(seed, 0x6766_6600);
    let mut coeff = vec![0.0f64; m * m];
    for j in 0..m {
        for k in 0..m {
            let z: f64 = rng.sample(StandardNormal);
            coeff[j * m + k] = z / laplacian_eigenvalue(m, j, k).sqrt();
        }
    }
    let interior = sine_both_axes(m, &coeff);
    let scale = 2.0 / mm1;
    let mut values = vec![0.0f64; n * n];
    for j in 0..m {
        for i in 0..m {
            values[(j + 1) * n + (i + 1)] = scale * interior[j * m + i];
        }
    }
    let half = 0.5 * (n - 1) as f64 * spacing;
    Ok(FieldGrid {
        n,
        spacing,
        values,
        window: Window {
            x0: -half,
            y0: -half,
            x1: half,
            y1: half,
        },
        singularity: None,
        seed,
    })
}

impl FieldGrid {
    /// Vertex position of (i, j).
    pub fn vertex(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.window.x0 + i as f64 * self.spacing,
            self.window.y0 + j as f64 * self.spacing,
        )
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    /// Perimeter fraction (counterclockwise from lower-left) of boundary
    /// vertex (i, j); `None` for interior vertices.
    fn boundary_fraction(&self, i: usize, j: usize) -> Option<f64> {
        let n = self.n;
        let edge = (n - 1) as f64;
        let total = 4.0 * edge;
        let pos = if j == 0 {
            i as f64
        } else if i == n - 1 {
            edge + j as f64
        } else if j == n - 1 {
            2.0 * edge + (n - 1 - i) as f64
        } else if i == 0 {
            3.0 * edge + (n - 1 - j) as f64
        } else {
            return None;
        };
        Some((pos / total).min(1.0 - 1e-12))
    }

    /// Add the discrete-harmonic extension of piecewise-constant boundary
    /// data; boundary vertices end up carrying the data exactly.
    pub fn add_harmonic_boundary(&self, spec: &BoundarySpec) -> Result<FieldGrid> {
        let n = self.n;
        let m = n - 2;
        let mut boundary = vec![0.0f64; n * n];
        for j in 0..n {
            for i in 0..n {
                if let Some(frac) = self.boundary_fraction(i, j) {
                    match spec.value_at(frac) {
                        Some(v) => boundary[j * n + i] = v,
                        None => {
                            return Err(Error::BoundarySpec(format!(
                                "perimeter fraction {frac:.4} uncovered"
                            )))
                        }
                    }
                }
            }
        }
        // -Lap u = rhs with rhs collecting boundary neighbors
        let mut rhs = vec![0.0f64; m * m];
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let mut s = 0.0;
                for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                    let (ni, nj) = ((i as i64 + di) as usize, (j as i64 + dj) as usize);
                    if ni == 0 || ni == n - 1 || nj == 0 || nj == n - 1 {
                        s += boundary[nj * n + ni];
                    }
                }
                rhs[(j - 1) * m + (i - 1)] = s;
            }
        }
        let interior = poisson_solve(m, &rhs);
        let mut out = self.clone();
        for j in 0..n {
            for i in 0..n {
                let add = if let Some(_) = self.boundary_fraction(i, j) {
                    boundary[j * n + i]
                } else {
                    interior[(j - 1) * m + (i - 1)]
                };
                out.values[j * n + i] += add;
            }
        }
        Ok(out)
    }

    /// Subtract `alpha*arg(v - z0) + beta*log|v - z0|` at every vertex and
    /// record the singularity for branch-cut compensation downstream.
    pub fn add_singularity(&self, z0: Point, alpha: f64, beta: f64) -> Result<FieldGrid> {
        if !self.window.contains(z0) {
            return Err(Error::OutOfDomain { x: z0.re, y: z0.im });
        }
        let sing = Singularity {
            center: z0,
            alpha,
            beta,
        };
        let mut out = self.clone();
        for j in 0..self.n {
            for i in 0..self.n {
                let v = self.vertex(i, j);
                if (v - z0).norm() < 1e-12 * self.spacing.max(1.0) {
                    return Err(Error::DegenerateSingularity);
                }
                out.values[j * self.n + i] += sing.term(v);
            }
        }
        out.singularity = Some(sing);
        Ok(out)
    }

    /// Multiply every vertex value by `factor` (field-unit rescaling).
    pub fn scaled(&self, factor: f64) -> FieldGrid {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= factor;
        }
        out
    }

    /// Add `offset` to every vertex value.
    pub fn shifted(&self, offset: f64) -> FieldGrid {
        let mut out = self.clone();
        for v in &mut out.values {
            *v += offset;
        }
        out
    }

    /// Piecewise-linear evaluation at `p`.  When the grid carries a
    /// singularity, the interpolation acts on the smooth remainder (stored
    /// vertex values minus the singular term) and the principal-branch term
    /// is added back analytically at `p`, so values stay meaningful across
    /// the branch cut and near the center.
    pub fn eval(&self, p: Point) -> Result<f64> {
        if !self.window.contains(p) {
            return Err(Error::OutOfDomain { x: p.re, y: p.im });
        }
        let fx = ((p.re - self.window.x0) / self.spacing).min((self.n - 1) as f64 - 1e-12);
        let fy = ((p.im - self.window.y0) / self.spacing).min((self.n - 1) as f64 - 1e-12);
        let i = fx.floor() as usize;
        let j = fy.floor() as usize;
        let u = fx - i as f64;
        let v = fy - j as f64;
        let corner = |di: usize, dj: usize| {
            let raw = self.value(i + di, j + dj);
            match self.singularity {
                Some(s) => raw - s.term(self.vertex(i + di, j + dj)),
                None => raw,
            }
        };
        let a = corner(0, 0);
        let b = corner(1, 0);
        let c = corner(0, 1);
        let d = corner(1, 1);
        // diagonal from (i,j) to (i+1,j+1)
        let smooth = if u >= v {
            a + u * (b - a) + v * (d - b)
        } else {
            a + v * (c - a) + u * (d - c)
        };
        Ok(match self.singularity {
            Some(s) => smooth + s.term(p),
            None => smooth,
        })
    }

    /// Central sub-window restriction (used by the whole-plane surrogate).
    fn central_window(&self, n_out: usize) -> FieldGrid {
        let off = (self.n - n_out) / 2;
        let mut values = vec![0.0f64; n_out * n_out];
        for j in 0..n_out {
            for i in 0..n_out {
                values[j * n_out + i] = self.value(i + off, j + off);
            }
        }
        let half = 0.5 * (n_out - 1) as f64 * self.spacing;
        FieldGrid {
            n: n_out,
            spacing: self.spacing,
            values,
            window: Window {
                x0: -half,
                y0: -half,
                x1: half,
                y1: half,
            },
            singularity: None,
            seed: self.seed,
        }
    }
}

/// Whole-plane surrogate: zero-boundary field on an enlarged box restricted
/// to the central window.  The field is meaningful modulo an additive
/// constant; consumers read it only through increments and flow lines.
pub fn whole_plane_approx(n: usize, margin: usize, spacing: f64, seed: u64) -> Result<FieldGrid> {
    if margin < 2 {
        return Err(Error::Domain {
            name: "margin",
            reason: format!("{margin} < 2"),
        });
    }
    let big = sample_zero_boundary(n * margin, spacing, seed)?;
    Ok(big.central_window(n))
}

// --- serialization -------------------------------------------------------

const MAGIC: &[u8; 4] = b"IMGF";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct GridHeader {
    magic: String,
    version: u32,
    n: usize,
    spacing: f64,
    seed: u64,
    window: Window,
    singularity: Option<Singularity>,
}

impl FieldGrid {
    /// Flat binary grid plus a JSON sidecar (`<path>.json`) mirroring the
    /// header.  Payload is row-major little-endian f64.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(MAGIC)?;
        f.write_all(&VERSION.to_le_bytes())?;
        f.write_all(&(self.n as u64).to_le_bytes())?;
        f.write_all(&self.spacing.to_le_bytes())?;
        f.write_all(&self.seed.to_le_bytes())?;
        for v in [
            self.window.x0,
            self.window.y0,
            self.window.x1,
            self.window.y1,
        ] {
            f.write_all(&v.to_le_bytes())?;
        }
        match self.singularity {
            Some(s) => {
                f.write_all(&[1u8])?;
                for v in [s.center.re, s.center.im, s.alpha, s.beta] {
                    f.write_all(&v.to_le_bytes())?;
                }
            }
            None => {
                f.write_all(&[0u8])?;
                f.write_all(&[0u8; 32])?;
            }
        }
        for v in &self.values {
            f.write_all(&v.to_le_bytes())?;
        }
        drop(f);
        let header = GridHeader {
            magic: "IMGF".into(),
            version: VERSION,
            n: self.n,
            spacing: self.spacing,
            seed: self.seed,
            window: self.window,
            singularity: self.singularity,
        };
        let sidecar = path.with_extension(format!(
            "{}json",
            path.extension()
                .map(|e| format!("{}.", e.to_string_lossy()))
                .unwrap_or_default()
        ));
        std::fs::write(sidecar, serde_json::to_string_pretty(&header)?)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<FieldGrid> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut buf4 = [0u8; 4];
        f.read_exact(&mut buf4)?;
        if &buf4 != MAGIC {
            return Err(Error::GridFormat("bad magic".into()));
        }
        f.read_exact(&mut buf4)?;
        if u32::from_le_bytes(buf4) != VERSION {
            return Err(Error::GridFormat("unsupported version".into()));
        }
        let mut b8 = [0u8; 8];
        let mut read_u64 = |f: &mut std::io::BufReader<std::fs::File>| -> Result<u64> {
            f.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let n = read_u64(&mut f)? as usize;
        let mut b8 = [0u8; 8];
        let mut read_f64 = |f: &mut std::io::BufReader<std::fs::File>| -> Result<f64> {
            f.read_exact(&mut b8)?;
            Ok(f64::from_le_bytes(b8))
        };
        let spacing = read_f64(&mut f)?;
        let seed = {
            let mut b = [0u8; 8];
            f.read_exact(&mut b)?;
            u64::from_le_bytes(b)
        };
        let mut b8 = [0u8; 8];
        let mut read_f64 = |f: &mut std::io::BufReader<std::fs::File>| -> Result<f64> {
            f.read_exact(&mut b8)?;
            Ok(f64::from_le_bytes(b8))
        };
        let window = Window {
            x0: read_f64(&mut f)?,
            y0: read_f64(&mut f)?,
            x1: read_f64(&mut f)?,
            y1: read_f64(&mut f)?,
        };
        let mut flag = [0u8; 1];
        f.read_exact(&mut flag)?;
        let mut sing_buf = [0u8; 32];
        f.read_exact(&mut sing_buf)?;
        let singularity = if flag[0] == 1 {
            let g = |k: usize| {
                f64::from_le_bytes(sing_buf[k * 8..(k + 1) * 8].try_into().unwrap())
            };
            Some(Singularity {
                center: Point::new(g(0), g(1)),
                alpha: g(2),
                beta: g(3),
            })
        } else {
            None
        };
        let mut values = vec![0.0f64; n * n];
        let mut b = [0u8; 8];
        for v in &mut values {
            f.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
        Ok(FieldGrid {
            n,
            spacing,
            values,
            window,
            singularity,
            seed,
        })
    }
}
