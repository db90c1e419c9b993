//! Green's function of the flat unit torus and the singular part
//! S = −2π Σ β_i G(· − p_i) of a divisor.
//!
//! G_p(x) = −(1/2π) χ(r) log r + H(x − p), r = |x − p| (nearest image), where
//! χ is a smooth cutoff equal to 1 for r ≤ 0.1 and 0 for r ≥ 0.45. The
//! remainder H solves a Poisson problem with smooth data and is tabulated
//! spectrally; the log term is always evaluated analytically.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Add, Div, Mul, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{invalid, Result};
use crate::field::{check_resolution, Chart, Field, ScalarField};
use crate::measure::Divisor;
use crate::point::Point;
use crate::quad;
use crate::spectral::Spectral;

pub const CUTOFF_INNER: f64 = 0.1;
pub const CUTOFF_OUTER: f64 = 0.45;

/// Remainder tables are never coarser than this.
pub const MIN_TABLE_RESOLUTION: usize = 512;

/// Nodes within this many cells (sup-norm) of an atom get cell averages
/// instead of point samples.
pub const NEAR_CELLS: i64 = 6;

/// Value with first and second derivative, for exact derivatives of the cutoff.
#[derive(Debug, Clone, Copy)]
struct Jet {
    v: f64,
    d: f64,
    dd: f64,
}

impl Jet {
    fn constant(v: f64) -> Jet {
        Jet { v, d: 0.0, dd: 0.0 }
    }
    fn exp(self) -> Jet {
        let e = self.v.exp();
        Jet {
            v: e,
            d: e * self.d,
            dd: e * (self.dd + self.d * self.d),
        }
    }
    fn recip(self) -> Jet {
        let r = 1.0 / self.v;
        Jet {
            v: r,
            d: -self.d * r * r,
            dd: (2.0 * self.d * self.d * r - self.dd) * r * r,
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            d: self.d + o.d,
            dd: self.dd + o.dd,
        }
    }
}
impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet {
            v: self.v - o.v,
            d: self.d - o.d,
            dd: self.dd - o.dd,
        }
    }
}
impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
            dd: self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd,
        }
    }
}
impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

/// e^{-1/s} for s > 0, zero otherwise.
fn bump_edge(s: Jet) -> Jet {
    if s.v <= 0.0 {
        Jet::constant(0.0)
    } else {
        (Jet::constant(0.0) - s.recip()).exp()
    }
}

/// Cutoff χ(r) with derivatives in r.
fn cutoff(r: f64) -> Jet {
    if r <= CUTOFF_INNER {
        return Jet::constant(1.0);
    }
    if r >= CUTOFF_OUTER {
        return Jet::constant(0.0);
    }
    let w = CUTOFF_OUTER - CUTOFF_INNER;
    let t = Jet {
        v: (r - CUTOFF_INNER) / w,
        d: 1.0 / w,
        dd: 0.0,
    };
    let a = bump_edge(Jet::constant(1.0) - t);
    let b = bump_edge(t);
    a / (a + b)
}

/// Right-hand side of −ΔH = −1 − (1/2π) Δ(χ log r) away from the origin.
fn remainder_source(r: f64) -> f64 {
    if r <= CUTOFF_INNER || r >= CUTOFF_OUTER {
        return -1.0;
    }
    let c = cutoff(r);
    -1.0 - (2.0 * c.d / r + r.ln() * (c.dd + c.d / r)) / (2.0 * PI)
}

/// Tabulated Green's function of the unit torus.
#[derive(Debug)]
pub struct TorusGreen {
    n: usize,
    /// H at displacements (j/n, i/n).
    table: Vec<f64>,
    spectral: Spectral,
}

impl TorusGreen {
    pub fn new(n: usize) -> Result<Self> {
        check_resolution(n)?;
        let spectral = Spectral::new(n, 1.0);
        let source = Field::from_fn(n, Chart::Torus, |d| remainder_source(d.wrap_torus().norm()))?;
        let mut table = spectral.solve_shifted(source.values(), 0.0);
        // Fix the constant so that G has zero mean: ∫H = ∫_0^b χ r log r dr.
        let a = CUTOFF_INNER;
        let inner = a * a * (2.0 * a.ln() - 1.0) / 4.0;
        let outer = quad::integrate(|r| cutoff(r).v * r * r.ln(), a, CUTOFF_OUTER, 1e-17, 1e-15)?;
        let shift = inner + outer - table.iter().sum::<f64>() / (n * n) as f64;
        for v in &mut table {
            *v += shift;
        }
        Ok(TorusGreen { n, table, spectral })
    }

    /// Process-wide cache keyed by table resolution.
    pub fn shared(n: usize) -> Result<Arc<TorusGreen>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<TorusGreen>>>> = OnceLock::new();
        let n = n.max(MIN_TABLE_RESOLUTION);
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(g) = cache.lock().expect("green cache poisoned").get(&n) {
            return Ok(g.clone());
        }
        let g = Arc::new(TorusGreen::new(n)?);
        cache
            .lock()
            .expect("green cache poisoned")
            .insert(n, g.clone());
        Ok(g)
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    /// Smooth remainder H at displacement `d`, by 6×6 Lagrange interpolation.
    pub fn remainder(&self, d: Point) -> f64 {
        let n = self.n;
        let nf = n as f64;
        let q = d.reduce_torus();
        let (fx, fy) = (q.x * nf, q.y * nf);
        let (jx, iy) = (fx.floor() as i64, fy.floor() as i64);
        let wx = lagrange6(fx - jx as f64);
        let wy = lagrange6(fy - iy as f64);
        let mut s = 0.0;
        for (a, wya) in wy.iter().enumerate() {
            let i = (iy + a as i64 - 2).rem_euclid(n as i64) as usize;
            let mut row = 0.0;
            for (b, wxb) in wx.iter().enumerate() {
                let j = (jx + b as i64 - 2).rem_euclid(n as i64) as usize;
                row += wxb * self.table[i * n + j];
            }
            s += wya * row;
        }
        s
    }

    /// G(x − p); infinite at the pole.
    pub fn eval(&self, x: Point, p: Point) -> f64 {
        let d = (x - p).wrap_torus();
        let r = d.norm();
        -cutoff(r).v * r.ln() / (2.0 * PI) + self.remainder(d)
    }

    /// G(d) + (1/2π) log|d|, smooth through d = 0.
    pub fn regular_part(&self, d: Point) -> f64 {
        let d = d.wrap_torus();
        let r = d.norm();
        let log_part = if r <= CUTOFF_INNER {
            0.0
        } else {
            (1.0 - cutoff(r).v) * r.ln() / (2.0 * PI)
        };
        log_part + self.remainder(d)
    }

    /// H(x − p) at the nodes of an m×m torus grid; m must divide the table size.
    fn remainder_on_grid(&self, p: Point, m: usize) -> Result<Vec<f64>> {
        if m > self.n || !self.n.is_multiple_of(m) {
            return Err(invalid(
                "grid resolution must divide the Green table resolution",
            ));
        }
        let moved = self.spectral.translate(&self.table, (p.x, p.y));
        let stride = self.n / m;
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                out.push(moved[i * stride * self.n + j * stride]);
            }
        }
        Ok(out)
    }

    /// G_p sampled on an m×m torus grid. Nodes near p carry cell averages so
    /// that the samples stay finite and integrate correctly.
    pub fn sample(&self, p: Point, m: usize) -> Result<Field> {
        let mut values = self.remainder_on_grid(p, m)?;
        let h = 1.0 / m as f64;
        for i in 0..m {
            for j in 0..m {
                let x = Point::new(j as f64 * h, i as f64 * h);
                let d = (x - p).wrap_torus();
                let k = i * m + j;
                if is_near(d, h) {
                    values[k] += -cell_mean_log(d, h)? / (2.0 * PI)
                        + (self.regular_part(d) - self.remainder(d));
                } else {
                    let r = d.norm();
                    values[k] += -cutoff(r).v * r.ln() / (2.0 * PI);
                }
            }
        }
        Field::new(m, Chart::Torus, values)
    }
}

/// Lagrange weights for nodes -2..=3 at offset t ∈ [0, 1).
fn lagrange6(t: f64) -> [f64; 6] {
    let mut w = [1.0; 6];
    for (a, wa) in w.iter_mut().enumerate() {
        let xa = a as f64 - 2.0;
        for b in 0..6 {
            if b != a {
                let xb = b as f64 - 2.0;
                *wa *= (t - xb) / (xa - xb);
            }
        }
    }
    w
}

pub(crate) fn is_near(d: Point, h: f64) -> bool {
    let lim = NEAR_CELLS as f64 * h + 1e-12 * h;
    d.x.abs() <= lim && d.y.abs() <= lim
}

/// Mean of log|y| over the cell of side h centred at d (pole at the origin).
fn cell_mean_log(d: Point, h: f64) -> Result<f64> {
    let radial = |_t: f64, rho: f64| {
        if rho <= 0.0 {
            0.0
        } else {
            rho * rho * (2.0 * rho.ln() - 1.0) / 4.0
        }
    };
    Ok(quad::cell_polar_integral(Point::ORIGIN, d, h, radial, 1e-13)? / (h * h))
}

/// u = S + v splitting data for a divisor on an n×n torus grid.
#[derive(Debug, Clone)]
pub struct SingularSplit {
    divisor: Divisor,
    s: Field,
    green: Arc<TorusGreen>,
}

/// Builds S = −2π Σ β_i G_{p_i} on an n×n grid.
pub fn singular_part(divisor: &Divisor, n: usize) -> Result<SingularSplit> {
    check_resolution(n)?;
    let green = TorusGreen::shared(n)?;
    let mut s = vec![0.0; n * n];
    for (p, beta) in divisor.atoms() {
        if beta == 0.0 {
            continue;
        }
        let g = green.sample(p, n)?;
        for (a, b) in s.iter_mut().zip(g.values()) {
            *a -= 2.0 * PI * beta * b;
        }
    }
    Ok(SingularSplit {
        divisor: divisor.clone(),
        s: Field::new(n, Chart::Torus, s)?,
        green,
    })
}

impl SingularSplit {
    pub fn divisor(&self) -> &Divisor {
        &self.divisor
    }

    /// Grid samples of S (cell averages next to atoms).
    pub fn field(&self) -> &Field {
        &self.s
    }

    pub fn n(&self) -> usize {
        self.s.n()
    }

    pub fn beta_sum(&self) -> f64 {
        self.divisor.weight_sum()
    }

    pub fn green(&self) -> &TorusGreen {
        &self.green
    }

    /// S at an arbitrary point (infinite at atoms with β ≠ 0).
    pub fn value(&self, x: Point) -> f64 {
        self.divisor
            .atoms()
            .map(|(p, b)| -2.0 * PI * b * self.green.eval(x, p))
            .sum()
    }

    /// S(x) − β_i log|x − p_i|, smooth near atom `i`.
    pub fn regular_near(&self, i: usize, x: Point) -> f64 {
        let mut s = 0.0;
        for (k, (p, b)) in self.divisor.atoms().enumerate() {
            if k == i {
                s -= 2.0 * PI * b * self.green.regular_part(x - p);
            } else {
                s -= 2.0 * PI * b * self.green.eval(x, p);
            }
        }
        s
    }
}

impl ScalarField for SingularSplit {
    fn value(&self, p: Point) -> f64 {
        SingularSplit::value(self, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_derivatives_match_differences() {
        for &r in &[0.15, 0.27, 0.4] {
            let e = 1e-5;
            let c = cutoff(r);
            let d = (cutoff(r + e).v - cutoff(r - e).v) / (2.0 * e);
            let dd = (cutoff(r + e).v - 2.0 * c.v + cutoff(r - e).v) / (e * e);
            assert!((c.d - d).abs() < 1e-6 * (1.0 + d.abs()));
            assert!((c.dd - dd).abs() < 1e-3 * (1.0 + dd.abs()));
        }
        assert_eq!(cutoff(0.05).v, 1.0);
        assert_eq!(cutoff(0.5).v, 0.0);
    }

    #[test]
    fn remainder_source_has_zero_mean() {
        // ∫ source dA = -1 + flux of ∇(χ log r) through r = a, divided by 2π.
        let v = quad::integrate(
            |r| (remainder_source(r) + 1.0) * 2.0 * PI * r,
            CUTOFF_INNER,
            CUTOFF_OUTER,
            1e-15,
            1e-13,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn green_is_symmetric_and_translation_invariant() {
        let g = TorusGreen::shared(64).unwrap();
        let (x, p) = (Point::new(0.12, 0.77), Point::new(0.61, 0.05));
        assert!((g.eval(x, p) - g.eval(p, x)).abs() < 1e-13);
        let shifted = g.eval(x - p, Point::ORIGIN);
        assert!((g.eval(x, p) - shifted).abs() < 1e-13);
    }

    /// Lattice sum with one direction summed in closed form:
    /// G(x, y) = (x² − x + 1/6)/2 + Σ_{k≥1} cos(2πky) cosh(πk(1−2x)) / (2πk sinh(πk)).
    fn lattice_sum_oracle(x: f64, y: f64) -> f64 {
        let x = x.rem_euclid(1.0);
        let mut s = (x * x - x + 1.0 / 6.0) / 2.0;
        for k in 1..200 {
            let k = k as f64;
            // cosh(a)/sinh(b) with a ≤ b, written to avoid overflow.
            let a = PI * k * (1.0 - 2.0 * x);
            let b = PI * k;
            let ratio = ((a.abs() - b).exp() + (-a.abs() - b).exp()) / (1.0 - (-2.0 * b).exp());
            s += (2.0 * PI * k * y).cos() * ratio / (2.0 * PI * k);
        }
        s
    }

    #[test]
    fn green_matches_lattice_sum() {
        let reference = lattice_sum_oracle(0.5, 0.5);
        assert!(
            (reference + 0.055_158_900_038_162_914).abs() < 1e-15,
            "{reference}"
        );
        let g = TorusGreen::shared(512).unwrap();
        let v = g.eval(Point::new(0.5, 0.5), Point::ORIGIN);
        assert!((v - reference).abs() < 1e-10, "{}", v - reference);
        let mut worst: f64 = 0.0;
        for &(x, y) in &[
            (0.013, 0.2),
            (0.31, 0.77),
            (0.05, 0.04),
            (0.48, 0.003),
            (0.9, 0.6),
        ] {
            let d = (g.eval(Point::new(x, y), Point::ORIGIN) - lattice_sum_oracle(x, y)).abs();
            worst = worst.max(d);
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn empty_divisor_gives_zero_split() {
        let s = singular_part(&Divisor::empty(), 32).unwrap();
        assert!(s.field().values().iter().all(|&v| v == 0.0));
    }
}
