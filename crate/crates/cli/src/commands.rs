use std::fmt::Write as _;

use fockdens::analysis::{classify, default_probes, density_report, jensen_test, linspace, ClassifyPolicy, DensityReport, CRITICAL};
use fockdens::geometry::rho_at;
use fockdens::partition::{build_partition, verify_partition};
use fockdens::potential::{multiplier_defects, multiplier_sup_defect};
use fockdens::rng::{seeded, stream};
use fockdens::solvers::{dbar_solve, interpolate, sampling_ratio, DbarOptions, GridFunction, InterpolateOptions, SamplingOptions};
use fockdens::{build_net, DensityTable, FlatWeight, MetricField, MultiplierEval, Net, Point, PointSequence, Rect, WeightModel};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::{Cli, Command, Common, RadiusGrid, SeqSource, WeightKind};
use crate::{io, Failure, Outcome};

fn to_map<T: Serialize>(v: &T) -> Map<String, Value> {
    match serde_json::to_value(v) {
        Ok(Value::Object(m)) => m,
        Ok(other) => Map::from_iter([("value".to_string(), other)]),
        Err(e) => Map::from_iter([("serialization_error".to_string(), json!(e.to_string()))]),
    }
}

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

fn model(c: &Common) -> Result<WeightModel, Failure> {
    match c.weight {
        WeightKind::RadialPower => Ok(WeightModel::radial_power(c.beta)?),
        WeightKind::Custom => {
            let path = c.table.as_deref().ok_or_else(|| input("--weight custom needs --table"))?;
            Ok(WeightModel::table(DensityTable::from_csv(&io::read_text(path)?)?))
        }
    }
}

fn omega(c: &Common) -> FlatWeight {
    if c.alpha == 0.0 {
        FlatWeight::One
    } else {
        FlatWeight::RhoPower(c.alpha)
    }
}

fn metric(c: &Common, m: &WeightModel) -> Result<MetricField, Failure> {
    if !(c.res >= 4.0) {
        return Err(input(format!("--res must be at least 4 nodes per ρ, got {}", c.res)));
    }
    Ok(MetricField::build(m, c.window, c.res)?)
}

fn sequence(s: &SeqSource, c: &Common, m: &WeightModel) -> Result<PointSequence, Failure> {
    match (&s.seq, s.lattice, s.build_net) {
        (Some(path), None, false) => io::read_sequence(path),
        (None, Some(a), false) if a > 0.0 => Ok(PointSequence::lattice(a, &c.window, s.offset)),
        (None, Some(a), false) => Err(input(format!("lattice spacing must be positive, got {a}"))),
        (None, None, true) => Ok(build_net(m, c.window, 1, 1)?.sequence),
        (None, None, false) => Err(input("give one of --seq, --lattice or --build-net")),
        _ => Err(input("--seq, --lattice and --build-net are exclusive")),
    }
}

fn r_grid(r: &RadiusGrid) -> Result<Vec<f64>, Failure> {
    if !(r.rmin > 0.0 && r.rmax >= r.rmin) || r.steps == 0 {
        return Err(input("need 0 < rmin ≤ rmax and steps ≥ 1"));
    }
    Ok(linspace(r.rmin, r.rmax, r.steps))
}

fn density_csv(rep: &DensityReport, seed: u64) -> String {
    let mut s = String::from("r,sup,inf\n");
    for ((r, a), b) in rep.r_grid.iter().zip(&rep.sup).zip(&rep.inf) {
        let _ = writeln!(s, "{r},{a},{b}");
    }
    let _ = writeln!(s, "# seed={seed} D+={} D-={} uncertainty={}", rep.d_plus, rep.d_minus, rep.uncertainty);
    s
}

fn points_json(seq: &PointSequence) -> Value {
    json!(seq.points.iter().map(|p| [p.re, p.im]).collect::<Vec<_>>())
}

/// e^φ times a smooth cutoff equal to 1 on |z| ≤ 0.6s and 0 beyond s.
fn flat_datum(m: &WeightModel, support: f64, h: f64) -> Result<GridFunction, Failure> {
    let cut = |r: f64| {
        let t = (r / support - 0.6) / 0.4;
        if t <= 0.0 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            let (a, b) = ((-1.0 / (1.0 - t)).exp(), (-1.0 / t).exp());
            a / (a + b)
        }
    };
    Ok(GridFunction::from_fn(Rect::square(2.0 * support), h, |z| Point::new(cut(z.norm()) * m.phi(z).exp(), 0.0))?)
}

fn grid_csv(g: &GridFunction) -> String {
    let mut s = String::from("x,y,re,im\n");
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (z, v) = (g.node(i, j), g.values[j * g.nx + i]);
            let _ = writeln!(s, "{},{},{},{}", z.re, z.im, v.re, v.im);
        }
    }
    s
}

pub fn dispatch(cli: &Cli) -> Result<Outcome, Failure> {
    let c = &cli.common;
    let m = model(c)?;
    let ok = |summary: String, fields: Map<String, Value>| Ok(Outcome { summary, fields, certified: true });
    match &cli.command {
        Command::Rho { at } => {
            let r = rho_at(&m, *at)?;
            ok(format!("{r:.7}"), to_map(&json!({ "z": [at.re, at.im], "rho": r })))
        }

        Command::Partition { mass } => {
            let p = build_partition(&m, c.window, *mass)?;
            let rep = verify_partition(&p, &m);
            let summary = format!(
                "{} cells ({} interior), worst mass error {:.2e}, worst aspect {:.3}, coverage gap {:.1e}",
                p.cells.len(),
                p.interior_count(),
                rep.worst_mass_error.0,
                rep.worst_aspect.0,
                rep.coverage_gap
            );
            let certified = rep.pass;
            let mut f = to_map(&p);
            f.insert("report".into(), json!(rep));
            Ok(Outcome { summary, fields: f, certified })
        }

        Command::Net { m: mm, n } => {
            let net = build_net(&m, c.window, *mm, *n)?;
            let summary = format!("{} points, cell mass {:.4}, max moment residual {:.1e}", net.sequence.len(), net.cell_mass, net.max_moment_residual);
            let mut f = Map::new();
            f.insert("points".into(), points_json(&net.sequence));
            f.insert("provenance".into(), json!(net.sequence.provenance));
            f.insert("net".into(), json!(net));
            ok(summary, f)
        }

        Command::Multiplier { net, probes, probe_window, csv, .. } => {
            let net: Net = match net {
                Some(path) => {
                    let v = io::read_value(path)?;
                    let inner = v.get("net").cloned().ok_or_else(|| input(format!("{}: no `net` block; write it with `fockdens net --out`", path.display())))?;
                    serde_json::from_value(inner).map_err(|e| input(format!("{}: {e}", path.display())))?
                }
                None => build_net(&m, c.window, 1, 1)?,
            };
            let ev = MultiplierEval::from_net(&m, &net)?;
            let mf = metric(c, &m)?;
            let region = match probe_window {
                Some(r) => *r,
                None => c.window.expand(-4.0 * m.rho(c.window.center())?),
            };
            if region.is_empty() || *probes < 2 {
                return Err(input("probe window is empty or has fewer than 2 points per side"));
            }
            let pts = region.grid(*probes, *probes);
            let rep = multiplier_sup_defect(&ev, &mf, &pts)?;
            if let Some(path) = csv {
                let mut s = String::from("x,y,defect\n");
                for (z, d) in pts.iter().zip(multiplier_defects(&ev, &mf, &pts)?) {
                    let d = d.map_or(f64::NAN, |d| d.0);
                    let _ = writeln!(s, "{},{},{d}", z.re, z.im);
                }
                io::write_text(path, &s)?;
            }
            let summary = format!("sup defect {:.4} over {} probes ({} on zeros skipped)", rep.sup, rep.probes_used, rep.probes_skipped);
            let certified = rep.sup.is_finite() && rep.probes_used > 0;
            let mut f = to_map(&rep);
            f.insert("probe_window".into(), json!(region));
            f.insert("zeros".into(), json!(net.sequence.len()));
            Ok(Outcome { summary, fields: f, certified })
        }

        Command::Density { source, radii, csv } => {
            let seq = sequence(source, c, &m)?;
            let mf = metric(c, &m)?;
            let (probes, placement) = default_probes(&mf, radii.rmax, radii.probes, c.seed)?;
            let rep = density_report(&mf, &seq, &r_grid(radii)?, &probes)?;
            if let Some(path) = csv {
                io::write_text(path, &density_csv(&rep, c.seed))?;
            }
            let summary = format!("D+ = {:.6}, D- = {:.6} ± {:.6} (critical {:.6}), {} points", rep.d_plus, rep.d_minus, rep.uncertainty, CRITICAL, seq.len());
            let mut f = to_map(&rep);
            f.insert("probe_spec".into(), json!(placement));
            f.insert("critical".into(), json!(CRITICAL));
            ok(summary, f)
        }

        Command::Classify { source, radii, delta_floor } => {
            let seq = sequence(source, c, &m)?;
            let mf = metric(c, &m)?;
            let policy = ClassifyPolicy { r_grid: r_grid(radii)?, probes: radii.probes, seed: c.seed, delta_floor: *delta_floor };
            let cl = classify(&mf, &seq, &policy)?;
            let summary = format!(
                "{} (D+ = {:.6}, D- = {:.6}, uncertainty {:.6}, separation {:.4}, critical {:.6})",
                serde_json::to_value(cl.verdict).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                cl.d_plus,
                cl.d_minus,
                cl.uncertainty,
                cl.separation,
                CRITICAL
            );
            let mut f = to_map(&cl);
            f.insert("policy".into(), json!(policy));
            ok(summary, f)
        }

        Command::Interpolate { source, values, count, p, tol, max_iter } => {
            let seq = sequence(source, c, &m)?;
            let mf = metric(c, &m)?;
            let w = omega(c);
            let scaled = match values {
                Some(path) => {
                    let v = io::read_values(path)?;
                    if v.len() != seq.len() {
                        return Err(input(format!("{} values for {} points", v.len(), seq.len())));
                    }
                    v
                }
                None => {
                    let centre = c.window.center();
                    let mut order: Vec<usize> = (0..seq.len()).collect();
                    order.sort_by(|&a, &b| (seq.points[a] - centre).norm().total_cmp(&(seq.points[b] - centre).norm()).then(a.cmp(&b)));
                    let mut rng = seeded(c.seed, stream::VALUES);
                    let mut v = vec![Point::new(0.0, 0.0); seq.len()];
                    for &i in order.iter().take(*count) {
                        let (x, y): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                        v[i] = Point::new(x, y) / 2f64.sqrt();
                    }
                    v
                }
            };
            let raw: Vec<Point> = seq
                .points
                .iter()
                .zip(&scaled)
                .map(|(&z, &s)| Ok(s * m.phi(z).exp() / w.eval(&m, z)?))
                .collect::<fockdens::Result<_>>()?;
            let opts = InterpolateOptions { p: *p, tol: *tol, max_iter: *max_iter, ..Default::default() };
            let r = interpolate(&mf, &w, &seq, &raw, &opts)?;
            let residual = r.residuals.iter().cloned().fold(0.0, f64::max);
            let summary = format!("residual {residual:.2e} after {} iterations over {} nodes, M = {:.4}", r.iterations, r.node_indices.len(), r.constant);
            let f = to_map(&json!({
                "nodes": r.node_indices.iter().map(|&i| [seq.points[i].re, seq.points[i].im]).collect::<Vec<_>>(),
                "targets": r.node_indices.iter().map(|&i| [scaled[i].re, scaled[i].im]).collect::<Vec<_>>(),
                "residuals": r.residuals,
                "max_residual": residual,
                "iterations": r.iterations,
                "history": r.history,
                "op_norm": r.op_norm,
                "norm_f": r.norm_f,
                "norm_v": r.norm_v,
                "constant": r.constant,
                "sigma_len": r.sigma_len,
                "separation": r.separation,
                "multiplier_defect": r.multiplier_defect,
                "options": opts,
            }));
            Ok(Outcome { summary, fields: f, certified: residual <= *tol })
        }

        Command::Dbar { datum, h, support, p, residual_tol, csv } => {
            let f = match datum {
                Some(path) => io::read_grid(path)?,
                None => flat_datum(&m, *support, *h)?,
            };
            let opts = DbarOptions { residual_tol: *residual_tol, ..Default::default() };
            let s = dbar_solve(&m, &omega(c), &f, p, opts)?;
            if let Some(path) = csv {
                io::write_text(path, &grid_csv(&s.u))?;
            }
            let consts: Vec<String> = s.report.norms.iter().map(|n| format!("C_{} = {:.4}", n.p, n.constant)).collect();
            let summary = format!("residual {:.2e} (tol {:.0e}), {}", s.report.residual, s.report.residual_tol, consts.join(", "));
            let mut fields = to_map(&s.report);
            fields.insert("options".into(), json!(opts));
            fields.insert("grid".into(), json!({ "window": f.window, "h": f.h, "nx": f.nx, "ny": f.ny }));
            Ok(Outcome { summary, fields, certified: s.report.certified })
        }

        Command::SampleTest { source, trials, p, max_terms } => {
            let seq = sequence(source, c, &m)?;
            let mf = metric(c, &m)?;
            let opts = SamplingOptions { p: *p, trials: *trials, seed: c.seed, max_terms: *max_terms, ..Default::default() };
            let r = sampling_ratio(&mf, &omega(c), &seq, &opts)?;
            let summary = format!("ratios in [{:.4}, {:.4}], C = {:.4} over {} trials, {} nodes", r.min, r.max, r.constant, r.trials.len(), r.nodes_used);
            let mut f = to_map(&r);
            f.insert("options".into(), json!(opts));
            ok(summary, f)
        }

        Command::Jensen { source, radii, slack } => {
            let seq = sequence(source, c, &m)?;
            let rows = radii.iter().map(|&r| jensen_test(&m, &seq, r, *slack)).collect::<fockdens::Result<Vec<_>>>()?;
            let gaps: Vec<String> = radii.iter().zip(&rows).map(|(r, j)| format!("R={r}: {:.3}", j.lhs - j.rhs)).collect();
            let summary = format!("lhs − rhs: {}", gaps.join(", "));
            let mut f = Map::new();
            f.insert("radii".into(), json!(radii));
            f.insert("results".into(), json!(rows));
            ok(summary, f)
        }

        Command::Report { inputs } if !inputs.is_empty() => collect(inputs),
        Command::Report { .. } => pipeline(c, &m),
    }
}

fn collect(inputs: &[std::path::PathBuf]) -> Result<Outcome, Failure> {
    let mut rows = Vec::new();
    let mut certified = true;
    for path in inputs {
        let v = io::read_value(path)?;
        let get = |k: &str| v.get(k).cloned().unwrap_or(Value::Null);
        certified &= v.get("certified").and_then(Value::as_bool).unwrap_or(true);
        rows.push(json!({ "file": path.display().to_string(), "command": get("command"), "summary": get("summary"), "certified": get("certified"), "seed": get("seed") }));
    }
    let summary = format!("{} artifacts, {}", rows.len(), if certified { "all certified" } else { "some certificates failed" });
    Ok(Outcome { summary, fields: Map::from_iter([("artifacts".to_string(), json!(rows))]), certified })
}

/// Net on the window, then its density, verdict and Jensen comparison.
fn pipeline(c: &Common, m: &WeightModel) -> Result<Outcome, Failure> {
    let net = build_net(m, c.window, 1, 1)?;
    let mf = metric(c, m)?;
    let rho_c = m.rho(c.window.center())?;
    let half = 0.5 * c.window.width().min(c.window.height());
    // radii that leave room for probe disks inside the window
    let r_max = (0.4 * half / rho_c).floor();
    if r_max < 2.0 {
        return Err(input("window too small for the report pipeline"));
    }
    let policy = ClassifyPolicy { r_grid: linspace(0.25 * r_max, r_max, 8), probes: 32, seed: c.seed, delta_floor: 0.1 };
    let cl = classify(&mf, &net.sequence, &policy)?;
    let r0 = m.rho(Point::new(0.0, 0.0))?;
    let jr = (0.8 * half / r0).floor();
    let j = jensen_test(m, &net.sequence, jr, 1.0)?;
    let summary = format!("net of {} points: D+ = {:.5}, D- = {:.5} (critical {:.5}); Jensen lhs/rhs = {:.3} at R = {jr}", net.sequence.len(), cl.d_plus, cl.d_minus, CRITICAL, j.lhs / j.rhs);
    let f = to_map(&json!({
        "net": { "points": net.sequence.len(), "cell_mass": net.cell_mass, "max_moment_residual": net.max_moment_residual },
        "classification": cl,
        "policy": policy,
        "jensen": j,
    }));
    Ok(Outcome { summary, fields: f, certified: true })
}
