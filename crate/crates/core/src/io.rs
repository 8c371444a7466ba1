//! Output formats: CSV tables, binary PPM images, and JSON run manifests
//! with content hashes for replay checks.

use crate::flow::{Forest, Side, Status};
use crate::{Point, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

/// Polyline table: one row per vertex, `id,index,x,y,turning`.
pub fn write_polyline_csv(path: &Path, lines: &[crate::flow::FlowLine]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "id,index,x,y,turning")?;
    for line in lines {
        for (k, p) in line.points.iter().enumerate() {
            writeln!(w, "{},{},{:.17e},{:.17e},{:.17e}", line.id, k, p.re, p.im, line.turning[k])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Forest edge table: `child,parent,x,y,arc,side` (one row per merge).
pub fn write_forest_csv(path: &Path, forest: &Forest) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "child,parent,x,y,arc,side")?;
    for e in &forest.merge_edges {
        let side = match e.side {
            Side::Left => "L",
            Side::Right => "R",
        };
        writeln!(
            w,
            "{},{},{:.17e},{:.17e},{},{}",
            e.child, e.parent, e.at.re, e.at.im, e.arc, side
        )?;
    }
    // unmerged roots appear with parent = -1 so the component structure is
    // recoverable from the file alone
    for line in &forest.lines {
        if !matches!(line.status, Status::Merged { .. }) {
            writeln!(
                w,
                "{},-1,{:.17e},{:.17e},0,R",
                line.id, line.start.re, line.start.im
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Driving-process table: `t,re_w,im_w,re_o,im_o,theta`.
pub fn write_driver_csv<I>(path: &Path, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (f64, Point, Point, f64)>,
{
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,re_w,im_w,re_o,im_o,theta")?;
    for (t, wv, ov, theta) in rows {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            t, wv.re, wv.im, ov.re, ov.im, theta
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Trace table: `t,x,y`.
pub fn write_trace_csv<I>(path: &Path, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (f64, Point)>,
{
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,x,y")?;
    for (t, p) in rows {
        writeln!(w, "{:.17e},{:.17e},{:.17e}", t, p.re, p.im)?;
    }
    w.flush()?;
    Ok(())
}

/// Space-filling visit table: `visit,cell_x,cell_y,area_time`.
pub fn write_curve_csv<I>(path: &Path, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (usize, f64, f64, f64)>,
{
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "visit,cell_x,cell_y,area_time")?;
    for (visit, x, y, area) in rows {
        writeln!(w, "{},{:.17e},{:.17e},{:.17e}", visit, x, y, area)?;
    }
    w.flush()?;
    Ok(())
}

/// Binary PPM (P6), 8-bit RGB, `pixels` row-major top-to-bottom.
pub fn write_ppm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    assert_eq!(pixels.len(), 3 * width * height);
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P6\n{} {}\n255\n", width, height)?;
    w.write_all(pixels)?;
    w.flush()?;
    Ok(())
}

/// Map scalar grid values to a diverging blue-white-red image, symmetric
/// about zero, row-major with row 0 at the top.
pub fn field_to_rgb(values: &[f64], n: usize) -> Vec<u8> {
    let amax = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut px = vec![0u8; 3 * n * n];
    for j in 0..n {
        for i in 0..n {
            let v = values[(n - 1 - j) * n + i] / amax; // flip: row 0 at top
            let (r, g, b) = if v >= 0.0 {
                (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
            } else {
                (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
            };
            let o = 3 * (j * n + i);
            px[o] = r as u8;
            px[o + 1] = g as u8;
            px[o + 2] = b as u8;
        }
    }
    px
}

/// SHA-256 of a file's bytes, lowercase hex.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(format!("{:x}", h.finalize()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Run manifest: the exact invocation plus hashes of every artifact, written
/// alongside the outputs so a run can be replayed and compared byte for byte.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub invocation: serde_json::Value,
    pub outputs: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(seed: u64, invocation: serde_json::Value) -> Self {
        Self {
            tool: "imgeo".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            invocation,
            outputs: Vec::new(),
        }
    }

    /// Hash `path` and record it.
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let meta = std::fs::metadata(path)?;
        self.outputs.push(ManifestEntry {
            path: path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            sha256: file_sha256(path)?,
            bytes: meta.len(),
        });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// Default manifest path next to an output file.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_header_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img.ppm");
        let px = field_to_rgb(&[1.0, -1.0, 0.0, 0.5], 2);
        write_ppm(&p, 2, 2, &px).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P6\n2 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 12);
        // values[0] is the bottom-left vertex, so after the top-down flip it
        // lands in the second pixel row; positive max is pure red
        assert_eq!(&px[6..9], &[255, 0, 0]);
        assert_eq!(&px[9..12], &[0, 0, 255]);
    }

    #[test]
    fn manifest_roundtrip_and_hash_stability() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("data.csv");
        std::fs::write(&f, "a,b\n1,2\n").unwrap();
        let mut m = Manifest::new(42, serde_json::json!({"cmd": "test"}));
        m.add_output(&f).unwrap();
        let mp = dir.path().join("run.manifest.json");
        m.write(&mp).unwrap();
        let back = Manifest::read(&mp).unwrap();
        assert_eq!(back.seed, 42);
        assert_eq!(back.outputs.len(), 1);
        assert_eq!(back.outputs[0].sha256, file_sha256(&f).unwrap());
        // identical content, identical hash
        let f2 = dir.path().join("copy.csv");
        std::fs::write(&f2, "a,b\n1,2\n").unwrap();
        assert_eq!(file_sha256(&f).unwrap(), file_sha256(&f2).unwrap());
    }

    #[test]
    fn csv_headers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write_driver_csv(
            &p,
            vec![(0.0, crate::Point::new(1.0, 0.0), crate::Point::new(0.0, 1.0), 0.5)],
        )
        .unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,re_w,im_w,re_o,im_o,theta\n"));
        let t = dir.path().join("t.csv");
        write_trace_csv(&t, vec![(0.0, crate::Point::new(0.0, 0.0))]).unwrap();
        assert!(std::fs::read_to_string(&t).unwrap().starts_with("t,x,y\n"));
    }
}
