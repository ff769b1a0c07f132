//! Snapshot CSV files, run manifests and SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::{Curve, EnvelopeCurves};
use crate::error::{Error, Result};
use crate::integrator::{SolverConfig, StepStats, Trajectory};
use crate::reference::GridTrajectory;

pub const SNAPSHOT_HEADER: [&str; 6] = ["t", "i", "x_left", "x_right", "q", "rho"];

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    create_parent(path)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// One row per cell per snapshot.
pub fn write_snapshots_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SNAPSHOT_HEADER)?;
    for p in &traj.snapshots {
        let rho = p.densities()?;
        for i in 0..p.q.len() {
            w.serialize((p.t, i + 1, p.x[i], p.x[i + 1], p.q[i], rho[i]))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Same schema as the particle snapshots, with the cell index in column `i`.
pub fn write_grid_csv(grid: &GridTrajectory, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SNAPSHOT_HEADER)?;
    for g in &grid.snapshots {
        for (j, &r) in g.cells.iter().enumerate() {
            let xl = g.x_left + j as f64 * g.dx;
            w.serialize((g.t, j, xl, xl + g.dx, r * g.dx, r))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Envelope and empirical curves side by side at the snapshot times.
pub fn write_envelope_csv(traj: &Trajectory, env: &EnvelopeCurves, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "t",
        "mass",
        "mass_upper",
        "x_left",
        "x_right",
        "support_bound",
        "max_rho",
        "rho_bound",
        "tv",
        "tv_bound",
    ])?;
    let q0 = traj.snapshots[0].total_mass();
    for p in &traj.snapshots {
        let d = crate::density::to_density(p)?;
        let tvb = env.b.as_ref().map(|b| b.eval(p.t));
        w.serialize((
            p.t,
            p.total_mass(),
            q0 * env.q.eval(p.t),
            p.x[0],
            p.x[p.x.len() - 1],
            env.s.eval(p.t),
            d.max_height(),
            env.r.eval(p.t),
            crate::density::total_variation(&d),
            tvb,
        ))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    create_parent(path)?;
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

impl OutputFile {
    pub fn hashed(path: &Path) -> Result<Self> {
        Ok(OutputFile {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        })
    }
}

/// Everything needed to reproduce a run with the same binary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub scenario_sha256: String,
    pub n: usize,
    pub config: SolverConfig,
    pub stats: StepStats,
    pub outputs: Vec<OutputFile>,
    pub wall_clock_seconds: f64,
    pub version: String,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Polyline of the reconstructed density at every snapshot.
pub fn density_svg(traj: &Trajectory, title: &str) -> Result<String> {
    let mut curves = Vec::new();
    for p in &traj.snapshots {
        let rho = p.densities()?;
        let mut pts = vec![(p.x[0], 0.0)];
        for i in 0..rho.len() {
            pts.push((p.x[i], rho[i]));
            pts.push((p.x[i + 1], rho[i]));
        }
        pts.push((p.x[p.x.len() - 1], 0.0));
        curves.push((format!("t = {}", p.t), pts));
    }
    Ok(svg_lines(title, "x", "density", &curves))
}

/// Empirical curve against its envelope.
pub fn envelope_svg(title: &str, empirical: &[(f64, f64)], envelope: &Curve) -> String {
    let env: Vec<(f64, f64)> = envelope
        .times
        .iter()
        .zip(&envelope.values)
        .filter(|(_, v)| v.is_finite())
        .map(|(t, v)| (*t, *v))
        .collect();
    svg_lines(
        title,
        "t",
        "value",
        &[
            ("empirical".to_string(), empirical.to_vec()),
            ("envelope".to_string(), env),
        ],
    )
}

fn svg_lines(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    curves: &[(String, Vec<(f64, f64)>)],
) -> String {
    let all = curves.iter().flat_map(|(_, c)| c.iter());
    let (mut x0, mut x1, mut y0, mut y1) =
        (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x0 -= 0.5;
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{m} {b} H{r} M{m} {b} V{m}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12">{xlabel} [{x0:.3}, {x1:.3}]</text>"#,
        MARGIN,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="5" y="{}" font-size="12">{ylabel} max {y1:.3}</text>"#,
        MARGIN - 10.0
    );
    let n = curves.len().max(1);
    for (k, (label, pts)) in curves.iter().enumerate() {
        let hue = 360.0 * k as f64 / n as f64;
        let mut d = String::new();
        for (j, &(x, y)) in pts.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2} {:.2}",
                if j == 0 { "M" } else { " L" },
                sx(x),
                sy(y)
            );
        }
        let _ = writeln!(
            s,
            r#"<path d="{d}" stroke="hsl({hue:.0},70%,40%)" fill="none" stroke-width="1.2"><title>{}</title></path>"#,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{quantile_init, InitialDensity};
    use crate::integrator::integrate;
    use crate::scenario::builtin_catalog;

    #[test]
    fn csv_round_trip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let s = builtin_catalog("transport").unwrap();
        let p0 = quantile_init(&InitialDensity::uniform(0.0, 1.0, 1.0).unwrap(), 8).unwrap();
        let traj = integrate(&p0, &s, &SolverConfig::new(1.0).with_snapshots(3)).unwrap();
        let (a, b) = (dir.path().join("a/snap.csv"), dir.path().join("b.csv"));
        write_snapshots_csv(&traj, &a).unwrap();
        write_snapshots_csv(&traj, &b).unwrap();
        assert_eq!(sha256_file(&a).unwrap(), sha256_file(&b).unwrap());
        let mut r = csv::Reader::from_path(&a).unwrap();
        assert_eq!(r.headers().unwrap(), SNAPSHOT_HEADER.as_slice());
        let rows: Vec<(f64, usize, f64, f64, f64, f64)> =
            r.deserialize().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 3 * 8);
        let (t, i, xl, xr, q, rho) = rows[8];
        assert_eq!((t, i), (0.5, 1));
        assert!((xl - 0.5).abs() < 1e-9 && (xr - 0.625).abs() < 1e-9);
        assert!((q - 0.125).abs() < 1e-15 && (rho - 1.0).abs() < 1e-8);
    }

    #[test]
    fn svg_is_well_formed() {
        let s = builtin_catalog("stationary").unwrap();
        let p0 = quantile_init(s.initial.as_ref().unwrap(), 10).unwrap();
        let traj = integrate(&p0, &s, &SolverConfig::new(1.0).with_snapshots(2)).unwrap();
        let svg = density_svg(&traj, "a < b").unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<path").count(), 3);
        assert!(svg.contains("a &lt; b"));
    }

    #[test]
    fn sha_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        write_text(&p, "abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
