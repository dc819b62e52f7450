use fockdens::discretize::{build_net, build_net_with, prescribe_zero};
use fockdens::potential::{build_peak, multiplier_sup_defect, smooth_regularize, AnalyticWindow, MultiplierEval, SourceCell, WindowOptions};
use fockdens::{pt, Error, FlatWeight, MetricField, Point, Rect, WeightModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn beta2_net(half: f64) -> (WeightModel, fockdens::Net, MultiplierEval) {
    let m = WeightModel::radial_power(2.0).unwrap();
    let net = build_net(&m, Rect::square(half), 1, 1).unwrap();
    let ev = MultiplierEval::from_net(&m, &net).unwrap();
    (m, net, ev)
}

#[test]
fn query_on_a_zero_is_a_pole() {
    let (_, net, ev) = beta2_net(4.0);
    let z = net.sequence.points[7];
    assert!(matches!(ev.log_multiplier(z), Err(Error::Pole { .. })));
    assert!(ev.log_multiplier(z + pt(1e-3, 0.0)).is_ok());
}

#[test]
fn conjugate_points_give_equal_values() {
    let (_, _, ev) = beta2_net(5.0);
    for z in [pt(0.3, 0.7), pt(-1.1, 2.2), pt(2.0, -0.45)] {
        let a = ev.log_multiplier(z).unwrap();
        let b = ev.log_multiplier(z.conj()).unwrap();
        assert!((a - b).abs() < 1e-10, "{z}: {a} vs {b}");
    }
}

#[test]
fn multipole_sum_matches_direct_summation() {
    for beta in [2.0, 3.0] {
        let m = WeightModel::radial_power(beta).unwrap();
        let net = build_net(&m, Rect::square(4.0), 1, 1).unwrap();
        let ev = MultiplierEval::from_net(&m, &net).unwrap();
        for z in [pt(0.13, 0.41), pt(-1.7, 0.9), pt(2.1, -2.3)] {
            let v = ev.eval(z).unwrap();
            let direct = ev.log_multiplier_direct(z).unwrap();
            assert!((v.value - direct).abs() <= v.tail + 1e-9 * (1.0 + direct.abs()), "beta={beta} z={z}: {} vs {direct} (tail {})", v.value, v.tail);
        }
    }
}

#[test]
fn larger_cutoff_stays_within_the_tail_bound() {
    let (_, _, ev) = beta2_net(8.0);
    let wider = ev.with_cutoff(1.5 * ev.cutoff).unwrap();
    for z in Rect::square(4.0).grid(7, 7) {
        let a = ev.eval(z).unwrap();
        let b = wider.eval(z).unwrap();
        assert!((a.value - b.value).abs() <= a.tail + 1e-11, "{z}: {} vs {} tail {}", a.value, b.value, a.tail);
    }
}

#[test]
fn cell_potential_decays_with_the_cancelled_order() {
    let model = WeightModel::radial_power(3.0).unwrap();
    // two base points per cell: moments of degree ≤ 2 cancel
    let net = build_net(&model, Rect::new(0.5, 0.5, 3.0, 3.0), 1, 2).unwrap();
    let ev = MultiplierEval::from_net(&model, &net).unwrap();
    let m_cancel = 3;
    let res = ev.moment_residuals(m_cancel);
    assert!(res.iter().all(|r| *r < 1e-8), "{res:?}");
    let i = 0;
    let c = ev.cell_center(i);
    let diam = ev.cells()[i].cell.diam();
    let pts: Vec<(f64, f64)> = [4.0, 8.0, 16.0, 32.0]
        .iter()
        .map(|&k| {
            let d = k * diam;
            let v = (0..16).map(|j| ev.cell_potential(i, c + Point::from_polar(d, 2.0 * PI * j as f64 / 16.0 + 0.1)).unwrap().abs()).fold(0.0, f64::max);
            (d.ln(), v.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!(-slope >= m_cancel as f64 - 0.5, "decay exponent {}", -slope);
}

#[test]
fn lattice_net_defect_is_finite_and_periodic() {
    let (model, net, ev) = beta2_net(9.0);
    let metric = MetricField::build(&model, Rect::square(9.0), 4.0).unwrap();
    let a = (PI / 2.0).sqrt();
    // the farthest point from the zeros of a central cell is its corner
    let corner = pt(0.0, 0.0);
    let probes: Vec<Point> = Rect::square(2.0).grid(21, 21);
    let rep = multiplier_sup_defect(&ev, &metric, &probes).unwrap();
    assert!(rep.sup.is_finite() && rep.sup < 5.0, "{rep:?}");
    let d0 = ev.log_multiplier(corner).unwrap() - model.phi(corner);
    // log|g| − φ is periodic for the lattice net
    for shift in [pt(a, 0.0), pt(0.0, a), pt(-a, a)] {
        for z in [corner, pt(0.2, 0.31)] {
            let u = ev.log_multiplier(z).unwrap() - model.phi(z);
            let v = ev.log_multiplier(z + shift).unwrap() - model.phi(z + shift);
            assert!((u - v).abs() < 1e-6, "{z} + {shift}: {u} vs {v}");
        }
    }
    assert!(d0.is_finite());
    assert_eq!(net.sequence.len(), ev.zeros().len());
}

#[test]
fn deleting_a_zero_makes_the_defect_grow_away_from_the_hole() {
    let (model, net, ev) = beta2_net(8.0);
    let metric = MetricField::build(&model, Rect::square(8.0), 4.0).unwrap();
    let a = (PI / 2.0).sqrt();
    let hole = net.sequence.points[net.sequence.nearest(pt(0.0, 0.0)).unwrap().0];
    let cells: Vec<SourceCell> = ev
        .cells()
        .iter()
        .map(|c| SourceCell { atoms: c.atoms.iter().copied().filter(|p| *p != hole).collect(), ..c.clone() })
        .collect();
    let holed = MultiplierEval::new(&model, cells).unwrap();
    // cell corners at growing distance from the hole, all far from other zeros
    let mut last = f64::NEG_INFINITY;
    for k in [0.0, 1.0, 3.0] {
        let z = hole + pt(k * a + a / 2.0, a / 2.0);
        let before = multiplier_sup_defect(&ev, &metric, &[z]).unwrap().sup;
        let after = multiplier_sup_defect(&holed, &metric, &[z]).unwrap().sup;
        let jump = after - before;
        assert!(jump > last, "k={k}: {before} -> {after}");
        assert!(((holed.log_multiplier(z).unwrap() - ev.log_multiplier(z).unwrap()) + (z - hole).norm().ln()).abs() < 1e-9);
        last = jump;
    }
}

#[test]
fn window_recovers_a_synthetic_harmonic_field() {
    let field = |z: Point| Ok((z * z).re + 0.3);
    let w = AnalyticWindow::build(field, &[], pt(0.2, -0.1), 2.0, WindowOptions::new(2.0)).unwrap();
    let mut phase = None;
    for z in Rect::square(1.0).grid(5, 5) {
        let d = w.exponent(z).unwrap() - (z * z + 0.3);
        assert!(d.re.abs() < 1e-8, "{z}: {d}");
        let p = *phase.get_or_insert(d.im);
        assert!((d.im - p).abs() < 1e-8);
    }
}

#[test]
fn window_with_a_single_central_zero_is_linear() {
    let field = |z: Point| Ok(z.norm().ln());
    let w = AnalyticWindow::build(field, &[pt(0.0, 0.0)], pt(0.0, 0.0), 1.0, WindowOptions::new(1.0)).unwrap();
    let c = w.eval(pt(0.5, 0.0)).unwrap() / pt(0.5, 0.0);
    assert!((c.norm() - 1.0).abs() < 1e-12);
    for z in [pt(0.3, 0.3), pt(-0.7, 0.1)] {
        assert!((w.eval(z).unwrap() - c * z).norm() < 1e-12);
    }
    let d = w.derivative_at_zero(pt(0.0, 0.0), 0.25).unwrap();
    assert!((d - c).norm() < 1e-12);
}

#[test]
fn derivative_of_a_two_zero_product() {
    let field = |z: Point| Ok((z * (z - 2.0)).norm().ln());
    let zeros = [pt(0.0, 0.0), pt(2.0, 0.0)];
    let w = AnalyticWindow::build(field, &zeros, pt(0.5, 0.0), 2.0, WindowOptions::new(2.0)).unwrap();
    let probe = pt(0.4, 0.9);
    let c = w.eval(probe).unwrap() / (probe * (probe - 2.0));
    let d = w.derivative_at_zero(pt(0.0, 0.0), 0.25).unwrap() / c;
    assert!((d - pt(-2.0, 0.0)).norm() < 1e-10, "{d}");
    assert!(w.derivative_at_zero(pt(1.0, 0.0), 0.25).is_err());
}

#[test]
fn net_window_matches_log_modulus_and_derivatives() {
    let (model, _, ev) = beta2_net(7.0);
    let w = AnalyticWindow::from_multiplier(&ev, pt(0.1, 0.05), 3.0).unwrap();
    let mut worst: f64 = 0.0;
    for z in Rect::square(2.0).grid(9, 9) {
        if let Ok(l) = ev.log_multiplier(z) {
            worst = worst.max((w.log_eval(z).unwrap().re - l).abs());
        }
    }
    assert!(worst < 1e-6, "log-modulus mismatch {worst}");
    let cr = w.cauchy_riemann_residual(&[pt(0.3, 0.2), pt(-1.0, 0.7)], 1e-5).unwrap();
    assert!(cr < 1e-6, "{cr}");
    let rho = model.rho(pt(0.0, 0.0)).unwrap();
    let mut scaled = Vec::new();
    for &l in w.zeros.iter().filter(|l| (*l - w.center).norm() < 2.0) {
        let d = w.derivative_at_zero(l, rho / 4.0).unwrap();
        let closed = w.log_derivative_closed(l).unwrap().exp();
        assert!((d - closed).norm() < 1e-8 * closed.norm(), "{l}: {d} vs {closed}");
        let h = 1e-4 * rho;
        let fd = (w.eval(l + h).unwrap() - w.eval(l - h).unwrap()) / (2.0 * h);
        assert!((fd - d).norm() < 1e-5 * d.norm(), "{l}: fd {fd} vs {d}");
        scaled.push(d.norm() * rho * (-model.phi(l)).exp());
    }
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().cloned().fold(0.0, f64::max);
    assert!(lo > 0.0 && hi / lo < 1.01, "|f'|ρe^-φ spread {lo}..{hi}");
}

#[test]
fn peaks_are_normalised_with_comparable_constants() {
    let model = WeightModel::radial_power(2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cs = Vec::new();
    for _ in 0..20 {
        let eta = pt(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let p = build_peak(&model, &FlatWeight::One, eta, 1.0, 2, 1.0).unwrap();
        let v = p.value(eta).unwrap();
        assert!((v - pt(1.0, 0.0)).norm() < 1e-12, "{v}");
        cs.push(p.c_eta.norm());
    }
    let lo = cs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = cs.iter().cloned().fold(0.0, f64::max);
    assert!(hi / lo < 20.0, "c_eta spread {lo}..{hi}");
}

#[test]
fn peak_decays_with_the_requested_order() {
    let model = WeightModel::radial_power(2.0).unwrap();
    let eta = pt(0.4, -0.3);
    let p = build_peak(&model, &FlatWeight::One, eta, 0.5, 4, 6.0).unwrap();
    let probes: Vec<Point> = Rect::centered(eta, 5.5, 5.5).grid(61, 61);
    let metric = MetricField::build(&model, Rect::centered(eta, 6.0, 6.0), 4.0).unwrap();
    let env = p.envelope(&model, &metric, &probes, 1.0).unwrap();
    assert!(env.constant.is_finite(), "{env:?}");
    assert!(env.decay_exponent >= 3.5, "decay {}", env.decay_exponent);
    // the point at d_φ = 5 obeys the certified bound
    let z = eta + 5.0 * model.rho(eta).unwrap();
    let lhs = (p.log_abs(z).unwrap() - 0.5 * (model.phi(z) - model.phi(eta))).exp() * (1.0 + 5f64.powi(4));
    assert!(lhs <= env.constant * (1.0 + 1e-9), "{lhs} vs {}", env.constant);
}

#[test]
fn regularised_weight_has_comparable_laplacian() {
    let model = WeightModel::radial_power(2.0).unwrap();
    let probes = Rect::square(3.0).grid(13, 13);
    let reg = smooth_regularize(&model, Rect::square(7.0), 1, 1, &probes).unwrap();
    let c = &reg.certificate;
    assert!(c.mass_error < 1e-8, "{c:?}");
    assert!(c.sup_psi_minus_phi < 3.0, "{c:?}");
    assert!(c.ratio_min > 0.1 && c.ratio_max < 10.0, "{c:?}");
}

#[test]
fn radial_bumps_keep_holomorphic_moments() {
    // ∫(ζ − c)^l X_a dA = (a − c)^l for a radial unit bump centred at a
    let (a, s, c) = (pt(0.3, -0.2), 0.7, pt(-0.4, 0.5));
    for l in 0..4u32 {
        let mut acc = Point::new(0.0, 0.0);
        let (nr, nt) = (200, 64);
        for i in 0..nr {
            let r = s * (i as f64 + 0.5) / nr as f64;
            let u = 1.0 - r * r / (s * s);
            let dens = 3.0 / (PI * s * s) * u * u;
            for k in 0..nt {
                let z = a + Point::from_polar(r, 2.0 * PI * k as f64 / nt as f64);
                acc += (z - c).powu(l) * dens * r * (s / nr as f64) * (2.0 * PI / nt as f64);
            }
        }
        let exact = (a - c).powu(l);
        assert!((acc - exact).norm() < 1e-4, "l={l}: {acc} vs {exact}");
    }
}

#[test]
fn prescribed_zero_is_a_zero_and_keeps_moments() {
    let model = WeightModel::radial_power(2.0).unwrap();
    let region = Rect::square(4.0);
    let metric = MetricField::build(&model, region, 4.0).unwrap();
    let mut net = build_net_with(&model, &metric, region, 2, 2, ).unwrap();
    let z0 = pt(0.37, -0.21);
    prescribe_zero(&mut net, &metric, z0).unwrap();
    assert!(net.sequence.points.contains(&z0));
    assert!(net.max_moment_residual < 1e-8, "{}", net.max_moment_residual);
    let ev = MultiplierEval::from_net(&model, &net).unwrap();
    assert!(matches!(ev.log_multiplier(z0), Err(Error::Pole { .. })));
}
