//! One-dimensional quadrature rules.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{CmlError, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

// Kronrod 15-point extension of the 7-point Gauss rule.
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

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Interval {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Interval {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over [a, b].
///
/// Stops when the estimated error drops below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate(f, b, a, abs_tol, rel_tol).map(|v| -v);
    }
    let (value, err) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a, b, value, err });
    let mut total = value;
    let mut total_err = err;
    for _ in 0..20_000 {
        if !total.is_finite() {
            return Err(CmlError::Quadrature("integrand is not finite".into()));
        }
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let worst = heap.pop().expect("heap never empties");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // Interval is at machine resolution; accept what we have.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, m);
        let (v2, e2) = gk15(&mut f, m, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Interval {
            a: worst.a,
            b: m,
            value: v1,
            err: e1,
        });
        heap.push(Interval {
            a: m,
            b: worst.b,
            value: v2,
            err: e2,
        });
    }
    // Recompute the sum to shed accumulated cancellation error before judging.
    let total: f64 = heap.iter().map(|i| i.value).sum();
    let total_err: f64 = heap.iter().map(|i| i.err).sum();
    if total_err <= 10.0 * abs_tol.max(rel_tol * total.abs()) {
        Ok(total)
    } else {
        Err(CmlError::Quadrature(format!(
            "error estimate {total_err:.3e} above tolerance after subdivision limit"
        )))
    }
}

/// Number of equispaced nodes used on a circle of radius `r` for a field
/// resolved at `resolution` samples per unit length.
pub fn circle_nodes(r: f64, resolution: usize) -> usize {
    ((2.0 * PI * r * resolution as f64).ceil() as usize).max(32)
}

/// Periodic trapezoidal rule for `f(theta)` over [0, 2π).
pub fn circle_mean<F: FnMut(f64) -> f64>(mut f: F, nodes: usize) -> f64 {
    let dt = 2.0 * PI / nodes as f64;
    (0..nodes).map(|j| f(j as f64 * dt)).sum::<f64>() / nodes as f64
}

/// ∫ over the square cell of side `h` centred at `center` of a function
/// given in polar form around `p`. `radial(theta, rho)` must return
/// ∫_0^rho g(p + r e_theta) r dr. The cell is split into signed triangles
/// (p, corner_k, corner_k+1), so `p` may lie inside, outside, or on the
/// boundary of the cell.
pub fn cell_polar_integral<F: FnMut(f64, f64) -> f64>(
    p: crate::point::Point,
    center: crate::point::Point,
    h: f64,
    mut radial: F,
    rel_tol: f64,
) -> Result<f64> {
    use crate::point::Point;
    let s = 0.5 * h;
    let corners = [
        center + Point::new(-s, -s),
        center + Point::new(s, -s),
        center + Point::new(s, s),
        center + Point::new(-s, s),
    ];
    let mut total = 0.0;
    for k in 0..4 {
        let a = corners[k] - p;
        let b = corners[(k + 1) % 4] - p;
        let cross = a.x * b.y - a.y * b.x;
        if cross.abs() <= 1e-13 * h * h {
            continue;
        }
        let sweep = cross.atan2(a.dot(b));
        let edge = b - a;
        // Foot of the perpendicular from p to the edge line.
        let t = -a.dot(edge) / edge.norm_sq();
        let foot = a + edge * t;
        let dist = foot.norm();
        let normal_angle = foot.y.atan2(foot.x);
        let start = a.y.atan2(a.x);
        let v = integrate(
            |theta| {
                let rho = dist / (theta - normal_angle).cos();
                radial(theta, rho)
            },
            start,
            start + sweep,
            1e-16 * h * h,
            rel_tol,
        )?;
        total += v;
    }
    Ok(total)
}
