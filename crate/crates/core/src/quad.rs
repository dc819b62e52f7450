//! One- and two-dimensional quadrature: Gauss–Legendre rules and adaptive
//! Gauss–Kronrod (7/15) with a global error queue.

use crate::error::{Error, Result};
use crate::types::Rect;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel; returns (estimate, error estimate).
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let err = ((kron - gauss) * h).abs();
    (kron * h, err)
}

struct Panel {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]` until the
/// estimated error is below `max(abs_tol, rel_tol·|value|)`.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    const MAX_PANELS: usize = 4000;
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, val: v, err: e });
    let mut total = v;
    let mut err = e;
    let mut n = 1;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if n >= MAX_PANELS {
            return Err(Error::numerical("adaptive quadrature", err));
        }
        let p = heap.pop().expect("heap nonempty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            // interval exhausted at machine precision
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        total += v1 + v2 - p.val;
        err += e1 + e2 - p.err;
        heap.push(Panel { a: p.a, b: m, val: v1, err: e1 });
        heap.push(Panel { a: m, b: p.b, val: v2, err: e2 });
        n += 1;
        if n % 64 == 0 {
            // resum to limit drift in the running totals
            total = heap.iter().map(|p| p.val).sum();
            err = heap.iter().map(|p| p.err).sum();
        }
    }
    let value: f64 = heap.iter().map(|p| p.val).sum();
    let error: f64 = heap.iter().map(|p| p.err).sum();
    if !value.is_finite() {
        return Err(Error::numerical("adaptive quadrature (non-finite)", f64::NAN));
    }
    Ok(Estimate { value, error })
}

/// Nested adaptive integration over a rectangle.
pub fn adaptive_rect<F: Fn(f64, f64) -> f64>(f: F, r: &Rect, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    let mut inner_err = 0.0f64;
    let mut failure = None;
    let h = r.height().max(1e-300);
    let outer = adaptive(
        |x| match adaptive(|y| f(x, y), r.y0, r.y1, abs_tol / (r.width().max(1e-300)) * 0.1, rel_tol * 0.1) {
            Ok(e) => {
                inner_err = inner_err.max(e.error);
                e.value
            }
            Err(e) => {
                failure = Some(e);
                0.0
            }
        },
        r.x0,
        r.x1,
        abs_tol,
        rel_tol,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let _ = h;
    Ok(Estimate { value: outer.value, error: outer.error + inner_err * r.width() })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            x[0] = 0.0;
            w[0] = 2.0;
            break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Cached Gauss–Legendre rule (orders up to 64).
pub fn gl_cached(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let c = CACHE.get_or_init(|| (0..=64).map(|k| if k == 0 { (vec![], vec![]) } else { gauss_legendre(k) }).collect());
    &c[n.clamp(1, 64)]
}

/// Tensor Gauss–Legendre rule over a rectangle with `n × n` nodes.
pub fn gauss_rect<F: FnMut(f64, f64) -> f64>(mut f: F, r: &Rect, n: usize) -> f64 {
    let (x, w) = gl_cached(n);
    let (cx, hx) = (0.5 * (r.x0 + r.x1), 0.5 * r.width());
    let (cy, hy) = (0.5 * (r.y0 + r.y1), 0.5 * r.height());
    let mut s = 0.0;
    for i in 0..x.len() {
        let xi = cx + hx * x[i];
        let mut row = 0.0;
        for j in 0..x.len() {
            row += w[j] * f(xi, cy + hy * x[j]);
        }
        s += w[i] * row;
    }
    s * hx * hy
}


/// Antiderivative F with ∂²F/∂x∂y = log √(x² + y²).
fn log_antiderivative(x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    if r2 == 0.0 {
        return 0.0;
    }
    let mut v = x * y * (r2.ln() - 3.0);
    if x != 0.0 {
        v += x * x * (y / x).atan();
    }
    if y != 0.0 {
        v += y * y * (x / y).atan();
    }
    0.5 * v
}

/// ∫∫_R log|z − ζ| dA(ζ) in closed form.
pub fn log_integral_rect(r: &Rect, z: crate::types::Point) -> f64 {
    let (a0, a1) = (r.x0 - z.re, r.x1 - z.re);
    let (b0, b1) = (r.y0 - z.im, r.y1 - z.im);
    log_antiderivative(a1, b1) - log_antiderivative(a0, b1) - log_antiderivative(a1, b0) + log_antiderivative(a0, b0)
}

#[cfg(test)]
mod log_tests {
    use super::*;
    use crate::types::Point;

    #[test]
    fn closed_form_log_integral_matches_quadrature() {
        let r = Rect::new(-0.3, 0.2, 0.9, 1.1);
        for z in [Point::new(3.0, -2.0), Point::new(0.1, 0.5), Point::new(-0.3, 0.2), Point::new(0.9, 0.6)] {
            let exact = log_integral_rect(&r, z);
            // split at z so the log singularity sits on piece corners
            let mut num = 0.0;
            for p in crate::weights::split_at_point_pub(&r, z) {
                num += adaptive_rect(|x, y| 0.5 * ((x - z.re).powi(2) + (y - z.im).powi(2)).max(1e-300).ln(), &p, 1e-13, 1e-12)
                    .unwrap()
                    .value;
            }
            assert!((exact - num).abs() < 1e-9, "z={z}: {exact} vs {num}");
        }
    }
}
