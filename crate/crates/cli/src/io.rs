//! Artifact files: sequences, values, grid data.

use std::fs;
use std::path::Path;

use fockdens::solvers::GridFunction;
use fockdens::{Point, PointSequence, Rect};
use serde::Deserialize;
use serde_json::Value;

use crate::Failure;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

#[derive(Deserialize)]
struct Points {
    points: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
struct Values {
    values: Vec<[f64; 2]>,
}

fn finite(v: &[[f64; 2]], what: &str, path: &Path) -> Result<Vec<Point>, Failure> {
    if v.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Failure::Input(format!("{}: non-finite {what}", path.display())));
    }
    Ok(v.iter().map(|&[x, y]| Point::new(x, y)).collect())
}

/// Any JSON object with a `points` array of [x, y] pairs.
pub fn read_sequence(path: &Path) -> Result<PointSequence, Failure> {
    let p: Points = parse_json(path)?;
    Ok(PointSequence::user(finite(&p.points, "point", path)?))
}

pub fn read_values(path: &Path) -> Result<Vec<Point>, Failure> {
    let v: Values = parse_json(path)?;
    finite(&v.values, "value", path)
}

pub fn read_value(path: &Path) -> Result<Value, Failure> {
    parse_json(path)
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    read(path)
}

/// Rows x,y,re[,im] covering a uniform grid with equal steps in x and y.
pub fn read_grid(path: &Path) -> Result<GridFunction, Failure> {
    let bad = |msg: String| Failure::Input(format!("{}: {msg}", path.display()));
    let mut rows = Vec::new();
    for (k, line) in read(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let nums: Result<Vec<f64>, _> = f.iter().map(|t| t.parse::<f64>()).collect();
        match nums {
            Ok(v) if v.len() == 3 || v.len() == 4 => rows.push((v[0], v[1], Point::new(v[2], v.get(3).copied().unwrap_or(0.0)))),
            Ok(_) => return Err(bad(format!("line {}: expected x,y,re[,im]", k + 1))),
            Err(_) if rows.is_empty() => continue,
            Err(_) => return Err(bad(format!("line {}: not numeric", k + 1))),
        }
    }
    let axis = |sel: fn(&(f64, f64, Point)) -> f64| {
        let mut v: Vec<f64> = rows.iter().map(sel).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (xs, ys) = (axis(|r| r.0), axis(|r| r.1));
    if xs.len() < 5 || ys.len() < 5 {
        return Err(bad("grid needs at least 5 nodes per side".into()));
    }
    let h = xs[1] - xs[0];
    let uniform = |v: &[f64]| v.windows(2).all(|w| ((w[1] - w[0]) / h - 1.0).abs() < 1e-6);
    if !uniform(&xs) || !uniform(&ys) {
        return Err(bad("nodes are not on a uniform grid with equal steps".into()));
    }
    if rows.len() != xs.len() * ys.len() {
        return Err(bad(format!("expected {} rows, got {}", xs.len() * ys.len(), rows.len())));
    }
    let mut g = GridFunction::zeros(Rect::new(xs[0], ys[0], xs[xs.len() - 1], ys[ys.len() - 1]), h).map_err(Failure::from)?;
    if g.nx != xs.len() || g.ny != ys.len() {
        return Err(bad("grid spacing does not divide the extent".into()));
    }
    for (x, y, v) in rows {
        let i = ((x - xs[0]) / h).round() as usize;
        let j = ((y - ys[0]) / h).round() as usize;
        g.values[j * g.nx + i] = v;
    }
    if g.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(bad("non-finite samples".into()));
    }
    Ok(g)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if path.as_os_str() == "-" {
        print!("{text}");
        return Ok(());
    }
    fs::write(path, text).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json(path: &Path, v: &Value) -> Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure::Input(e.to_string()))?;
    s.push('\n');
    write_text(path, &s)
}
