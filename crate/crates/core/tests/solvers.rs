mod common;

use std::f64::consts::PI;

use fockdens::analysis::{default_probes, density_report, linspace, CRITICAL};
use fockdens::geometry::separation;
use fockdens::solvers::{
    cauchy_cell_kernel, complete_to_net, dbar_solve, extremal_growth, interpolate, sampling_ratio, CompletionParams, DbarOptions, Exponent, GridFunction,
    InterpolateOptions, RatioProbe, SamplingOptions,
};
use fockdens::{pt, AnalyticWindow, Error, FlatWeight, MetricField, Point, PointSequence, Rect, WeightModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gauss() -> WeightModel {
    WeightModel::radial_power(2.0).unwrap()
}

fn metric(model: &WeightModel, half: f64) -> MetricField {
    MetricField::build(model, Rect::square(half), 4.0).unwrap()
}

/// 1 on [0, r0], 0 beyond r1, C^∞ in between.
fn cutoff(r: f64, r0: f64, r1: f64) -> f64 {
    let t = (r - r0) / (r1 - r0);
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let a = (-1.0 / (1.0 - t)).exp();
    let b = (-1.0 / t).exp();
    a / (a + b)
}

fn disk_datum(h: f64) -> GridFunction {
    GridFunction::from_fn(Rect::square(2.0), h, |z| Point::new(cutoff(z.norm(), 0.6, 1.0), 0.0)).unwrap()
}

const PS: [Exponent; 3] = [Exponent(1.0), Exponent(2.0), Exponent::INF];

// ---- ∂̄ ----

#[test]
fn cell_kernel_matches_quadrature() {
    // tensor Gauss–Legendre on the cell; the integrand is smooth off the origin cell
    let (x, w) = gauss_legendre_8();
    let h = 0.05;
    for (dx, dy) in [(1, 0), (0, 1), (1, 1), (2, -1), (-3, 2), (5, 5), (9, 0), (12, -7), (70, 3)] {
        let (cx, cy) = (dx as f64 * h, dy as f64 * h);
        let mut s = Point::new(0.0, 0.0);
        // split into 4×4 sub-cells so the nearest cells resolve the 1/w growth
        let k = 4;
        for a in 0..k {
            for b in 0..k {
                let x0 = cx - h / 2.0 + h * a as f64 / k as f64;
                let y0 = cy - h / 2.0 + h * b as f64 / k as f64;
                let sh = h / k as f64;
                for i in 0..8 {
                    for j in 0..8 {
                        let p = pt(x0 + sh * (x[i] + 1.0) / 2.0, y0 + sh * (x[j] + 1.0) / 2.0);
                        s += w[i] * w[j] * sh * sh / 4.0 / p;
                    }
                }
            }
        }
        let want = s / PI;
        let got = cauchy_cell_kernel(dx, dy, h);
        assert!((got - want).norm() <= 1e-9 * want.norm(), "({dx}, {dy}): {got} vs {want}");
    }
    assert_eq!(cauchy_cell_kernel(0, 0, h), Point::new(0.0, 0.0));
    assert!((cauchy_cell_kernel(-2, 3, h) + cauchy_cell_kernel(2, -3, h)).norm() < 1e-15);
}

fn gauss_legendre_8() -> ([f64; 8], [f64; 8]) {
    let x = [-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498, 0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
    let w = [0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620, 0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];
    (x, w)
}

#[test]
fn zero_datum_gives_zero_solution() {
    let f = GridFunction::zeros(Rect::square(2.0), 0.05).unwrap();
    let s = dbar_solve(&gauss(), &FlatWeight::One, &f, &PS, DbarOptions::default()).unwrap();
    assert_eq!(s.report.active, 0);
    assert_eq!(s.report.residual, 0.0);
    assert!(s.u.values.iter().all(|v| *v == Point::new(0.0, 0.0)));
}

#[test]
fn datum_in_the_margin_is_rejected() {
    let f = GridFunction::from_fn(Rect::square(2.0), 0.05, |_| Point::new(1.0, 0.0)).unwrap();
    match dbar_solve(&gauss(), &FlatWeight::One, &f, &PS, DbarOptions::default()) {
        Err(Error::Domain(msg)) => assert!(msg.contains("margin"), "{msg}"),
        other => panic!("expected a margin error, got {other:?}"),
    }
}

#[test]
fn solution_is_linear_in_the_datum() {
    let m = gauss();
    let h = 0.04;
    let f = disk_datum(h);
    let g = GridFunction::from_fn(Rect::square(2.0), h, |z| Point::new(z.re, -2.0 * z.im) * cutoff(z.norm(), 0.3, 0.9)).unwrap();
    let (a, b) = (Point::new(0.7, -1.3), Point::new(-2.0, 0.4));
    let mix = GridFunction { values: f.values.iter().zip(&g.values).map(|(x, y)| a * x + b * y).collect(), ..f.clone() };
    let uf = dbar_solve(&m, &FlatWeight::One, &f, &PS, DbarOptions::default()).unwrap().u;
    let ug = dbar_solve(&m, &FlatWeight::One, &g, &PS, DbarOptions::default()).unwrap().u;
    let um = dbar_solve(&m, &FlatWeight::One, &mix, &PS, DbarOptions::default()).unwrap().u;
    let scale = um.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let err = um.values.iter().zip(uf.values.iter().zip(&ug.values)).map(|(m, (x, y))| (m - a * x - b * y).norm()).fold(0.0, f64::max);
    assert!(err <= 1e-12 * scale, "{err} vs {scale}");
}

#[test]
fn residual_falls_under_refinement() {
    let m = gauss();
    let coarse = dbar_solve(&m, &FlatWeight::One, &disk_datum(0.04), &PS, DbarOptions::default()).unwrap();
    let fine = dbar_solve(&m, &FlatWeight::One, &disk_datum(0.02), &PS, DbarOptions::default()).unwrap();
    assert!(coarse.report.residual / fine.report.residual >= 1.5, "{} -> {}", coarse.report.residual, fine.report.residual);
    assert!(fine.report.residual < 2e-3, "{}", fine.report.residual);
    for n in &fine.report.norms {
        assert!(n.constant > 0.0 && n.constant.is_finite(), "{n:?}");
    }
}

#[test]
fn solution_differs_from_the_radial_cauchy_transform_by_a_holomorphic_function() {
    // for radial f, C[f](z) = M(|z|)/(πz) with M(r) = ∫_{|w|<r} f dm
    let (r0, r1) = (0.6, 1.0);
    let f = GridFunction::from_fn(Rect::square(2.0), 0.02, |z| Point::new(cutoff(z.norm(), r0, r1), 0.0)).unwrap();
    let s = dbar_solve(&gauss(), &FlatWeight::One, &f, &PS, DbarOptions::default()).unwrap();
    let mass = |r: f64| {
        let n = 4000;
        let dr = r / n as f64;
        (0..n).map(|k| (k as f64 + 0.5) * dr).map(|t| 2.0 * PI * t * cutoff(t, r0, r1) * dr).sum::<f64>()
    };
    let cauchy = |z: Point| if z.norm() < 1e-12 { Point::new(0.0, 0.0) } else { Point::new(mass(z.norm()) / PI, 0.0) / z };
    let g = |z: Point| s.u.eval(z).unwrap() - cauchy(z);
    // mean-value property of g on circles inside the inner region
    let scale = g(pt(0.0, 0.0)).norm().max(1.0);
    for c in [pt(0.0, 0.0), pt(0.2, -0.1), pt(-0.15, 0.25)] {
        for r in [0.1, 0.3] {
            let n = 64;
            let mean = (0..n).map(|k| g(c + Point::from_polar(r, 2.0 * PI * k as f64 / n as f64))).sum::<Point>() / n as f64;
            assert!((mean - g(c)).norm() < 5e-3 * scale, "c={c} r={r}: {mean} vs {}", g(c));
        }
    }
}

// ---- completion ----

fn completion_density(lambda_step: Option<f64>) -> (f64, f64) {
    let m = gauss();
    let mf = metric(&m, 24.0);
    let lambda = match lambda_step {
        Some(a) => PointSequence::lattice(a, &mf.window(), pt(0.0, 0.0)),
        None => PointSequence::user(vec![]),
    };
    let c = complete_to_net(&mf, &lambda, &CompletionParams::default()).unwrap();
    assert!(c.separation > 0.0);
    assert!(c.max_moment_residual < 1e-9, "{}", c.max_moment_residual);
    assert_eq!(c.combined.len(), c.lambda_used.len() + c.sigma.len());
    let inner = metric(&m, 22.0);
    let (probes, _) = default_probes(&inner, 50.0, 64, 5).unwrap();
    let rep = density_report(&inner, &c.combined, &linspace(20.0, 50.0, 16), &probes).unwrap();
    let target = (1.0 - c.params.eps) * CRITICAL;
    (rep.d_plus / target, rep.d_minus / target)
}

#[test]
fn completing_nothing_gives_the_reduced_critical_density() {
    let (up, down) = completion_density(None);
    assert!((up - 1.0).abs() < 0.05 && (down - 1.0).abs() < 0.05, "{up} {down}");
}

#[test]
fn completing_a_sparse_lattice_gives_the_reduced_critical_density() {
    let (up, down) = completion_density(Some(2.0));
    assert!((up - 1.0).abs() < 0.05 && (down - 1.0).abs() < 0.05, "{up} {down}");
}

#[test]
fn completion_keeps_the_given_points_and_is_separated() {
    let m = gauss();
    let mf = metric(&m, 8.0);
    let lambda = PointSequence::lattice(2.0, &mf.window(), pt(0.0, 0.0));
    let c = complete_to_net(&mf, &lambda, &CompletionParams::default()).unwrap();
    for &i in &c.lambda_used {
        assert!(c.combined.points.contains(&lambda.points[i]));
    }
    assert!(separation(&c.combined, &mf) > 0.05);
    assert!(c.defect.sup.is_finite());
    let zeros = &c.multiplier.zeros().points;
    assert_eq!(zeros.len(), c.combined.len());
}

#[test]
fn multiplier_derivative_is_bounded_by_the_local_norm() {
    // Cauchy on the circle |z − λ| = ρ_ψ(λ), ψ = (1 − ε)φ:
    // |F′(λ)|ρ e^{−ψ(λ)} ≤ max |F|e^{−ψ} · e^{max(ψ − ψ(λ))}
    let m = gauss();
    let mf = metric(&m, 8.0);
    let lambda = PointSequence::lattice(2.0, &mf.window(), pt(0.0, 0.0));
    let params = CompletionParams::default();
    let c = complete_to_net(&mf, &lambda, &params).unwrap();
    let psi = m.scaled(1.0 - params.eps);
    let win = AnalyticWindow::from_multiplier(&c.multiplier, pt(0.0, 0.0), 5.0).unwrap();
    let mut checked = 0;
    for &z in &c.combined.points {
        let rho = psi.rho(z).unwrap();
        if z.norm() + 1.5 * rho > 0.9 * win.radius {
            continue;
        }
        let lhs = win.log_derivative_closed(z).unwrap().re + rho.ln() - psi.phi(z);
        let mut rhs = f64::NEG_INFINITY;
        let mut bump = f64::NEG_INFINITY;
        for k in 0..128 {
            let w = z + Point::from_polar(rho, 2.0 * PI * (k as f64 + 0.5) / 128.0);
            rhs = rhs.max(win.log_eval(w).unwrap().re - psi.phi(w));
            bump = bump.max(psi.phi(w) - psi.phi(z));
        }
        assert!(lhs <= rhs + bump + 1e-6, "λ = {z}: {lhs} > {rhs} + {bump}");
        checked += 1;
    }
    assert!(checked >= 20, "{checked}");
}

#[test]
fn dense_lattice_cannot_be_completed() {
    let m = gauss();
    let mf = metric(&m, 8.0);
    let lambda = PointSequence::lattice(1.0, &mf.window(), pt(0.0, 0.0));
    match complete_to_net(&mf, &lambda, &CompletionParams::default()) {
        Err(Error::Domain(msg)) => assert!(msg.contains("smaller ε"), "{msg}"),
        other => panic!("expected a capacity error, got {:?}", other.map(|c| c.sigma.len())),
    }
}

#[test]
fn bad_completion_parameters_are_rejected() {
    let m = gauss();
    let mf = metric(&m, 6.0);
    let empty = PointSequence::user(vec![]);
    for p in [CompletionParams { eps: 0.0, ..Default::default() }, CompletionParams { eps: 1.0, ..Default::default() }, CompletionParams { m: 0, ..Default::default() }] {
        assert!(matches!(complete_to_net(&mf, &empty, &p), Err(Error::Domain(_))), "{p:?}");
    }
}

// ---- interpolation ----

fn lattice_problem(half: f64) -> (WeightModel, MetricField, PointSequence) {
    let m = gauss();
    let mf = metric(&m, half);
    let lambda = PointSequence::lattice(2.0, &mf.window(), pt(0.0, 0.0));
    (m, mf, lambda)
}

#[test]
fn zero_values_need_no_iterations() {
    let (_, mf, lambda) = lattice_problem(8.0);
    let v = vec![Point::new(0.0, 0.0); lambda.len()];
    let r = interpolate(&mf, &FlatWeight::One, &lambda, &v, &InterpolateOptions::default()).unwrap();
    assert_eq!(r.iterations, 0);
    assert_eq!(r.norm_f, 0.0);
    for z in [pt(0.0, 0.0), pt(1.3, -0.7)] {
        assert_eq!(r.interpolant.eval(z).unwrap(), Point::new(0.0, 0.0));
    }
}

#[test]
fn unit_value_at_one_node() {
    let (m, mf, lambda) = lattice_problem(8.0);
    let k = common::central(&lambda, 1)[0];
    let mut v = vec![Point::new(0.0, 0.0); lambda.len()];
    v[k] = Point::new(1.0, 0.0);
    let r = interpolate(&mf, &FlatWeight::One, &lambda, &v, &InterpolateOptions::default()).unwrap();
    for &i in &r.node_indices {
        let z = lambda.points[i];
        let scaled = r.interpolant.eval_scaled(z).unwrap();
        if i == k {
            assert!((scaled * m.phi(z).exp() - 1.0).norm() <= 1e-6, "{scaled}");
        } else {
            assert!(scaled.norm() <= 1e-6, "node {z}: {scaled}");
        }
    }
}

#[test]
fn random_values_match_the_collocation_oracle() {
    let (m, mf, lambda) = lattice_problem(8.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let central = common::central(&lambda, 25);
    let draws = common::complex_normals(&mut rng, central.len());
    let mut v = vec![Point::new(0.0, 0.0); lambda.len()];
    for (&i, d) in central.iter().zip(&draws) {
        // values of unit weighted size
        v[i] = d * m.phi(lambda.points[i]).exp();
    }
    let r = interpolate(&mf, &FlatWeight::One, &lambda, &v, &InterpolateOptions::default()).unwrap();
    assert!(r.iterations <= 20);
    assert!(r.residuals.iter().all(|x| *x <= 1e-6));
    assert!(r.constant.is_finite() && r.constant >= 1.0, "M = {}", r.constant);

    let nodes: Vec<Point> = r.node_indices.iter().map(|&i| lambda.points[i]).collect();
    let scaled: Vec<Point> = r.node_indices.iter().map(|&i| v[i] * (-m.phi(lambda.points[i])).exp()).collect();
    let oracle = common::collocation_oracle(&nodes, &scaled);
    for (z, s) in nodes.iter().zip(&scaled) {
        let ours = r.interpolant.eval_scaled(*z).unwrap();
        assert!((ours - oracle(*z)).norm() <= 1e-5, "{z}: {ours} vs {}", oracle(*z));
        assert!((ours - s).norm() <= 1e-6);
    }
}

#[test]
fn interpolating_the_restriction_reproduces_it() {
    let (m, mf, lambda) = lattice_problem(8.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let central = common::central(&lambda, 9);
    let draws = common::complex_normals(&mut rng, central.len());
    let mut v = vec![Point::new(0.0, 0.0); lambda.len()];
    for (&i, d) in central.iter().zip(&draws) {
        v[i] = d * m.phi(lambda.points[i]).exp();
    }
    let opts = InterpolateOptions::default();
    let first = interpolate(&mf, &FlatWeight::One, &lambda, &v, &opts).unwrap();
    let mut w = vec![Point::new(0.0, 0.0); lambda.len()];
    for &i in &first.node_indices {
        w[i] = first.interpolant.eval(lambda.points[i]).unwrap();
    }
    let second = interpolate(&mf, &FlatWeight::One, &lambda, &w, &opts).unwrap();
    for &i in &second.node_indices {
        let z = lambda.points[i];
        let d = (second.interpolant.eval_scaled(z).unwrap() - first.interpolant.eval_scaled(z).unwrap()).norm();
        assert!(d <= opts.tol, "{z}: {d}");
    }
}

#[test]
fn value_outside_the_disk_is_rejected() {
    let (_, mf, lambda) = lattice_problem(8.0);
    let far = (0..lambda.len()).max_by(|&a, &b| lambda.points[a].norm().total_cmp(&lambda.points[b].norm())).unwrap();
    let mut v = vec![Point::new(0.0, 0.0); lambda.len()];
    v[far] = Point::new(1.0, 0.0);
    assert!(matches!(interpolate(&mf, &FlatWeight::One, &lambda, &v, &InterpolateOptions::default()), Err(Error::Domain(_))));
}

// ---- sampling ----

#[test]
fn single_peak_on_a_node_is_bounded_below_by_its_own_term() {
    let m = gauss();
    let mf = metric(&m, 6.0);
    let lambda = PointSequence::lattice(0.8, &mf.window(), pt(0.0, 0.0));
    for p in PS {
        let probe = RatioProbe::new(&mf, &FlatWeight::One, &lambda, &SamplingOptions { p, ..Default::default() }).unwrap();
        for eta in [pt(0.0, 0.0), pt(0.8, -1.6)] {
            let t = probe.trial(vec![eta], vec![Point::new(1.0, 0.0)]).unwrap();
            assert!(t.seq_norm >= 1.0 - 1e-9, "p={p} η={eta}: {}", t.seq_norm);
        }
    }
}

#[test]
fn sampling_report_is_reproducible() {
    let m = gauss();
    let mf = metric(&m, 6.0);
    let lambda = PointSequence::lattice(0.8, &mf.window(), pt(0.0, 0.0));
    let opts = SamplingOptions { trials: 10, seed: 4, ..Default::default() };
    let a = sampling_ratio(&mf, &FlatWeight::One, &lambda, &opts).unwrap();
    let b = sampling_ratio(&mf, &FlatWeight::One, &lambda, &opts).unwrap();
    assert_eq!(a, b);
    let c = sampling_ratio(&mf, &FlatWeight::One, &lambda, &SamplingOptions { seed: 5, ..opts }).unwrap();
    assert_ne!(a.trials[0].centres, c.trials[0].centres);
    assert!(a.min <= a.max && a.constant >= 1.0 / a.min && a.constant >= a.max);
}

// ---- extremal growth ----

#[test]
fn growth_bounds_bracket_the_fock_extremals() {
    // with area element ρ^{−2}dm = 4π dm: K(z, z) = e^{2|z|²}/(2π²) for p = 2,
    // and |f(z)|e^{−|z|²} ≤ ‖f‖/(4π²) exactly for p = 1
    let m = gauss();
    let exact = [(Exponent(1.0), 1.0 / (4.0 * PI * PI)), (Exponent(2.0), 1.0 / (PI * 2f64.sqrt())), (Exponent::INF, 1.0)];
    for (p, e) in exact {
        for z in [pt(0.0, 0.0), pt(1.1, -0.4)] {
            let g = extremal_growth(&m, &FlatWeight::One, p, z).unwrap();
            assert!(g.lower <= e * (1.0 + 1e-9) && e <= g.upper * (1.0 + 1e-9), "p={p} z={z}: {} ≤ {e} ≤ {}", g.lower, g.upper);
            assert!(g.lower >= 0.8 * e, "p={p}: lower {} far below {e}", g.lower);
        }
    }
}

#[test]
fn growth_ratio_is_stable_across_a_sweep() {
    let m = gauss();
    let ratios: Vec<f64> = (0..10)
        .map(|k| {
            let z = Point::from_polar(0.35 * k as f64, 0.7 * k as f64);
            let g = extremal_growth(&m, &FlatWeight::One, Exponent(2.0), z).unwrap();
            assert!(g.lower <= g.upper);
            g.upper / g.lower
        })
        .collect();
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi / lo < 2.0, "{ratios:?}");
}

#[test]
fn growth_lower_stays_below_upper_for_a_variable_density() {
    let m = WeightModel::radial_power(3.0).unwrap();
    for p in PS {
        let g = extremal_growth(&m, &FlatWeight::One, p, pt(2.5, 0.5)).unwrap();
        assert!(g.lower <= g.upper, "p={p}: {} vs {}", g.lower, g.upper);
    }
}

#[test]
fn rho_weight_rescales_the_bounds() {
    let m = gauss();
    let z = pt(0.4, 0.9);
    let rho = m.rho(z).unwrap();
    let one = extremal_growth(&m, &FlatWeight::One, Exponent(2.0), z).unwrap();
    let with_rho = extremal_growth(&m, &FlatWeight::RhoPower(1.0), Exponent(2.0), z).unwrap();
    let (l1, u1) = one.absolute();
    let (l2, u2) = with_rho.absolute();
    assert!((l2 / l1 - 1.0 / rho).abs() < 1e-9 / rho);
    assert!((u2 / u1 - 1.0 / rho).abs() < 1e-9 / rho);
}
