//! The ten acceptance criteria, one PASS/FAIL line each. Runs without the
//! libtest harness so the lines are always printed.

mod common;

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use fockdens::analysis::{classify, default_probes, density_report, jensen_test, linspace, local_density, mean_coverage_integral, ClassifyPolicy, Verdict, CRITICAL};
use fockdens::geometry::{rho_at, translate};
use fockdens::partition::{build_partition, verify_partition};
use fockdens::potential::multiplier_sup_defect;
use fockdens::solvers::{dbar_solve, interpolate, sampling_ratio, DbarOptions, Exponent, GridFunction, InterpolateOptions, SamplingOptions};
use fockdens::{build_net, pt, FlatWeight, MetricField, MultiplierEval, Point, PointSequence, Rect, WeightModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn gauss() -> WeightModel {
    WeightModel::radial_power(2.0).unwrap()
}

fn metric(model: &WeightModel, half: f64) -> MetricField {
    MetricField::build(model, Rect::square(half), 4.0).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rho_oracle() -> Outcome {
    let cases = [
        (2.0, pt(0.7, -1.3), 1.0 / (2.0 * PI.sqrt())),
        (4.0, pt(0.0, 0.0), (8.0 * PI).powf(-0.25)),
        (1.0, pt(0.0, 0.0), 1.0 / (2.0 * PI)),
    ];
    let mut worst: f64 = 0.0;
    for (beta, z, want) in cases {
        let got = rho_at(&WeightModel::radial_power(beta).unwrap(), z).map_err(|e| e.to_string())?;
        worst = worst.max((got / want - 1.0).abs());
    }
    check(worst <= 1e-6, format!("worst relative error {worst:.2e}"))
}

fn partition() -> Outcome {
    let m = gauss();
    let p = build_partition(&m, Rect::square(10.0), 1.0).map_err(|e| e.to_string())?;
    let rep = verify_partition(&p, &m);
    let side = p.interior().map(|c| (2.0 * c.hw - 0.5).abs().max((2.0 * c.hh - 0.5).abs())).fold(0.0, f64::max);
    let ok = rep.pass && rep.worst_mass_error.0 <= 1e-3 && rep.worst_aspect.0 <= 2.0 && side <= 1e-3 && rep.coverage_gap.abs() <= 1e-9;
    check(
        ok,
        format!(
            "{} interior cells, side error {side:.1e}, mass error {:.1e}, aspect {:.4}, coverage gap {:.1e}",
            p.interior_count(),
            rep.worst_mass_error.0,
            rep.worst_aspect.0,
            rep.coverage_gap
        ),
    )
}

fn net_density() -> Outcome {
    let m = gauss();
    let net = build_net(&m, Rect::square(16.0), 1, 1).map_err(|e| e.to_string())?;
    let mf = metric(&m, 14.0);
    let (probes, _) = default_probes(&mf, 30.0, 64, 0).map_err(|e| e.to_string())?;
    let rep = density_report(&mf, &net.sequence, &linspace(15.0, 30.0, 16), &probes).map_err(|e| e.to_string())?;
    let (up, down) = (rep.d_plus / CRITICAL, rep.d_minus / CRITICAL);
    check((up - 1.0).abs() < 0.05 && (down - 1.0).abs() < 0.05, format!("D⁺ = {:.5} ({up:.3}×), D⁻ = {:.5} ({down:.3}×) of 1/2π", rep.d_plus, rep.d_minus))
}

fn multiplier_certificate() -> Outcome {
    let m = gauss();
    let defect = |half: f64| -> Result<f64, String> {
        let region = Rect::square(half + 4.0);
        let net = build_net(&m, region, 1, 1).map_err(|e| e.to_string())?;
        let ev = MultiplierEval::from_net(&m, &net).map_err(|e| e.to_string())?;
        let mf = MetricField::build(&m, region, 4.0).map_err(|e| e.to_string())?;
        let probes = Rect::square(half).grid(61, 61);
        Ok(multiplier_sup_defect(&ev, &mf, &probes).map_err(|e| e.to_string())?.sup)
    };
    let small = defect(10.0)?;
    let large = defect(15.0)?;
    let change = (large / small - 1.0).abs();
    check(small.is_finite() && large.is_finite() && change < 0.2, format!("defect {small:.4} on 20×20, {large:.4} on 30×30, change {:.1}%", 100.0 * change))
}

fn lattice_threshold() -> Outcome {
    let m = gauss();
    let mf = metric(&m, 22.0);
    let policy = ClassifyPolicy { r_grid: linspace(20.0, 60.0, 16), ..Default::default() };
    let a_star = (PI / 2.0).sqrt();
    let step = 0.05;
    let mut rows = Vec::new();
    for k in 0..=20 {
        let a = 0.8 + step * k as f64;
        let seq = PointSequence::lattice(a, &mf.window(), pt(0.0, 0.0));
        let v = classify(&mf, &seq, &policy).map_err(|e| e.to_string())?.verdict;
        rows.push((a, v));
    }
    let rank = |v: Verdict| match v {
        Verdict::SamplingSide => 0,
        Verdict::CriticalBand => 1,
        Verdict::InterpolatingSide => 2,
        Verdict::Neither => 3,
    };
    let monotone = rows.windows(2).all(|w| rank(w[0].1) <= rank(w[1].1)) && rows.iter().all(|r| r.1 != Verdict::Neither);
    let band: Vec<f64> = rows.iter().filter(|r| r.1 == Verdict::CriticalBand).map(|r| r.0).collect();
    let flip = if band.is_empty() { f64::NAN } else { band.iter().sum::<f64>() / band.len() as f64 };
    let ok = monotone && !band.is_empty() && (flip - a_star).abs() <= step + 1e-9 && rows[0].1 == Verdict::SamplingSide && rows[20].1 == Verdict::InterpolatingSide;
    let summary: Vec<String> = rows
        .iter()
        .filter(|r| (r.0 - a_star).abs() < 0.16)
        .map(|r| format!("{:.2}:{}", r.0, ["S", "C", "I", "N"][rank(r.1)]))
        .collect();
    check(ok, format!("critical band at a = {band:?}, a* = {a_star:.4}; near the flip {}", summary.join(" ")))
}

fn interpolation() -> Outcome {
    let m = gauss();
    let mf = metric(&m, 8.0);
    let lambda = PointSequence::lattice(2.0, &mf.window(), pt(0.0, 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let central = common::central(&lambda, 25);
    let draws = common::complex_normals(&mut rng, central.len());
    let mut v = vec![Point::new(0.0, 0.0); lambda.len()];
    for (&i, d) in central.iter().zip(&draws) {
        v[i] = d * m.phi(lambda.points[i]).exp();
    }
    let r = interpolate(&mf, &FlatWeight::One, &lambda, &v, &InterpolateOptions::default()).map_err(|e| e.to_string())?;
    let residual = r.residuals.iter().cloned().fold(0.0, f64::max);
    let nodes: Vec<Point> = r.node_indices.iter().map(|&i| lambda.points[i]).collect();
    let scaled: Vec<Point> = r.node_indices.iter().map(|&i| v[i] * (-m.phi(lambda.points[i])).exp()).collect();
    let oracle = common::collocation_oracle(&nodes, &scaled);
    let mut gap: f64 = 0.0;
    for z in &nodes {
        gap = gap.max((r.interpolant.eval_scaled(*z).map_err(|e| e.to_string())? - oracle(*z)).norm());
    }
    check(
        residual <= 1e-6 && r.iterations <= 20 && gap <= 1e-5,
        format!("residual {residual:.1e} after {} iterations, oracle gap {gap:.1e}, M = {:.2}", r.iterations, r.constant),
    )
}

fn sampling() -> Outcome {
    let m = gauss();
    // p = 1: the ℓ¹/F¹ pair separates the 2ℤ² holes most clearly for this peak family
    let opts = SamplingOptions { p: Exponent(1.0), trials: 50, seed: 0, ..Default::default() };
    let run = |half: f64, a: f64| {
        let mf = metric(&m, half);
        let lambda = PointSequence::lattice(a, &mf.window(), pt(0.0, 0.0));
        sampling_ratio(&mf, &FlatWeight::One, &lambda, &opts).map_err(|e| e.to_string())
    };
    let base = run(6.0, 0.8)?;
    let grown = run(9.0, 0.8)?;
    let sparse = run(6.0, 2.0)?;
    let drift = (grown.constant / base.constant - 1.0).abs();
    let degradation = base.min / sparse.min;
    check(
        drift < 0.25 && degradation >= 5.0,
        format!("C = {:.3} → {:.3} (drift {:.2}%), min ratio 0.8ℤ² {:.4} vs 2ℤ² {:.4} ({degradation:.2}×)", base.constant, grown.constant, 100.0 * drift, base.min, sparse.min),
    )
}

fn dbar() -> Outcome {
    let m = gauss();
    // e^{|z|²} times a smooth cutoff: flat against the weight e^{−φ}
    let cut = |r: f64| {
        let t = (r - 0.6) / 0.4;
        if t <= 0.0 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            let (a, b) = ((-1.0 / (1.0 - t)).exp(), (-1.0 / t).exp());
            a / (a + b)
        }
    };
    let f = GridFunction::from_fn(Rect::square(2.0), 0.01, |z| Point::new(cut(z.norm()) * z.norm_sqr().exp(), 0.0)).map_err(|e| e.to_string())?;
    let ps = [Exponent(1.0), Exponent(2.0), Exponent::INF];
    let s = dbar_solve(&m, &FlatWeight::One, &f, &ps, DbarOptions::default()).map_err(|e| e.to_string())?;
    let c: Vec<f64> = s.report.norms.iter().map(|n| n.constant).collect();
    let spread = c.iter().cloned().fold(0.0, f64::max) / c.iter().cloned().fold(f64::INFINITY, f64::min);
    check(
        s.report.residual <= 1e-3 && spread < 2.0,
        format!("residual {:.2e}, C_1 = {:.3}, C_2 = {:.3}, C_∞ = {:.3} (spread {spread:.2}×)", s.report.residual, c[0], c[1], c[2]),
    )
}

fn jensen() -> Outcome {
    let m = gauss();
    let seq = PointSequence::lattice(0.8, &Rect::square(13.0), pt(0.4, 0.4));
    let mut gaps = Vec::new();
    for r in [10.0, 20.0, 30.0, 40.0] {
        let j = jensen_test(&m, &seq, r, 1.0).map_err(|e| e.to_string())?;
        gaps.push(j.lhs - j.rhs);
    }
    let increasing = gaps[0] > 0.0 && gaps.windows(2).all(|w| w[1] > w[0]);
    let net = build_net(&m, Rect::square(13.0), 1, 1).map_err(|e| e.to_string())?;
    let j = jensen_test(&m, &net.sequence, 40.0, 1.0).map_err(|e| e.to_string())?;
    let ratio = j.lhs / j.rhs;
    check(
        increasing && (0.9..=1.1).contains(&ratio),
        format!("lattice lhs − rhs = {:?}, net lhs/rhs = {ratio:.4} at R = 40", gaps.iter().map(|g| (g * 100.0).round() / 100.0).collect::<Vec<_>>()),
    )
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut notes = Vec::new();
    let mut ok = true;

    let mut moment: f64 = 0.0;
    for (beta, m, n) in [(2.0, 2, 2), (3.0, 2, 2), (3.0, 1, 3)] {
        let net = build_net(&WeightModel::radial_power(beta).unwrap(), Rect::square(3.0), m, n).map_err(|e| e.to_string())?;
        moment = moment.max(net.max_moment_residual);
    }
    ok &= moment <= 1e-6;
    notes.push(format!("moments {moment:.1e}"));

    let mut lip: f64 = 0.0;
    for _ in 0..200 {
        let beta = rng.random_range(1.0..4.0);
        let model = WeightModel::radial_power(beta).unwrap();
        let z = pt(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let w = pt(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let d = (model.rho(z).unwrap() - model.rho(w).unwrap()).abs();
        lip = lip.max(d / (z - w).norm());
    }
    ok &= lip <= 1.0 + 1e-6;
    notes.push(format!("Lipschitz ρ {lip:.4}"));

    let m4 = WeightModel::radial_power(4.0).unwrap();
    let mf = metric(&m4, 4.0);
    let seq = PointSequence::lattice(0.37, &mf.window(), pt(0.011, -0.023));
    let mut trans: f64 = 0.0;
    for _ in 0..12 {
        let x = pt(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
        let z = pt(rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8));
        let r = rng.random_range(1.5..3.0);
        let frame = translate(&m4, &FlatWeight::One, x).map_err(|e| e.to_string())?;
        let (lo, hi) = (frame.tau_inv(pt(-4.0, -4.0)), frame.tau_inv(pt(4.0, 4.0)));
        let mf_x = MetricField::build(&frame.model, Rect::new(lo.re, lo.im, hi.re, hi.im), 4.0).map_err(|e| e.to_string())?;
        let a = local_density(&mf, &seq, z, r).map_err(|e| e.to_string())?;
        let b = local_density(&mf_x, &frame.pull_sequence(&seq), frame.tau_inv(z), r).map_err(|e| e.to_string())?;
        trans = trans.max((a - b).abs() / a);
    }
    ok &= trans <= 1e-9;
    notes.push(format!("translation {trans:.1e}"));

    let mut landau: f64 = 0.0;
    for beta in [2.0, 4.0] {
        let model = WeightModel::radial_power(beta).unwrap();
        for r in [5.0, 10.0, 20.0] {
            for zeta in [pt(1.0, 0.0), pt(0.0, 0.0), pt(-0.7, 1.9)] {
                let i = mean_coverage_integral(&model, zeta, r).map_err(|e| e.to_string())?;
                landau = landau.max((i - 1.0).abs() * r);
            }
        }
    }
    ok &= landau < 1.0;
    notes.push(format!("max r|I_r − 1| {landau:.3}"));

    let m2 = gauss();
    let mf = metric(&m2, 10.0);
    let policy = ClassifyPolicy { r_grid: linspace(4.0, 12.0, 5), probes: 16, ..Default::default() };
    let mut both = 0;
    for k in 0..12 {
        let a = 0.8 + 0.1 * k as f64;
        let mut seq = PointSequence::lattice(a, &mf.window(), pt(0.0, 0.0));
        if k % 2 == 1 {
            let extra: Vec<Point> = (0..60).map(|_| pt(rng.random_range(-9.5..9.5), rng.random_range(-9.5..9.5))).collect();
            seq = seq.union(&PointSequence::user(extra));
        }
        let c = classify(&mf, &seq, &policy).map_err(|e| e.to_string())?;
        let (s, i) = c.sides(policy.delta_floor);
        both += (s && i) as usize;
    }
    ok &= both == 0;
    notes.push(format!("both-sided verdicts {both}/12"));

    check(ok, notes.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("ρ oracle", rho_oracle, Duration::from_secs(1)),
        ("partition", partition, Duration::from_secs(10)),
        ("net density", net_density, Duration::from_secs(60)),
        ("multiplier certificate", multiplier_certificate, Duration::from_secs(120)),
        ("lattice threshold", lattice_threshold, Duration::from_secs(300)),
        ("interpolation", interpolation, Duration::from_secs(120)),
        ("sampling inequality", sampling, Duration::from_secs(180)),
        ("∂̄ solver", dbar, Duration::from_secs(360)),
        ("Jensen test", jensen, Duration::from_secs(30)),
        ("property suites", property_suites, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let dt = t.elapsed();
        let out = match out {
            Ok(d) if dt > *budget => Err(format!("{d}; over the {budget:?} budget")),
            o => o,
        };
        let (tag, detail) = match &out {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("[{tag}] {:>2}. {name}: {detail} ({:.1}s)", k + 1, dt.as_secs_f64());
        failed += out.is_err() as usize;
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
