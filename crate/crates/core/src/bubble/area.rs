//! Area and gradient integrals of closed-form conformal factors.

use std::f64::consts::PI;

use crate::error::{invalid, CmlError, Result};
use crate::field::ScalarField;
use crate::point::Point;
use crate::quad::{gauss_legendre, integrate};

const REL_TOL: f64 = 1e-13;

/// ρ² ∫_0^{2π} e^{2u(c + ρ e^{iθ})} dθ with ρ = e^s, kept in one exponent
/// so that large u on tiny circles does not overflow.
fn ring_density<F: ScalarField + ?Sized>(u: &F, c: Point, s: f64) -> Result<f64> {
    let rho = s.exp();
    integrate(
        |t| (2.0 * (u.value(c + Point::polar(rho, t)) + s)).exp(),
        0.0,
        2.0 * PI,
        0.0,
        REL_TOL,
    )
}

/// Area of D_t(c) \ D_s(c) for e^{2u}|dz|², integrating in log r one unit at a time.
pub fn annulus_area<F: ScalarField + ?Sized>(u: &F, c: Point, s: f64, t: f64) -> Result<f64> {
    if !(s > 0.0 && s < t) {
        return Err(invalid(format!(
            "annulus needs 0 < s < t, got s = {s}, t = {t}"
        )));
    }
    check_contains(u, c, t)?;
    let (a, b) = (s.ln(), t.ln());
    let chunks = (b - a).ceil().max(1.0) as usize;
    let w = (b - a) / chunks as f64;
    let mut total = 0.0;
    for j in 0..chunks {
        total += log_chunk(u, c, b - (j + 1) as f64 * w, b - j as f64 * w)?;
    }
    Ok(total)
}

fn log_chunk<F: ScalarField + ?Sized>(u: &F, c: Point, a: f64, b: f64) -> Result<f64> {
    let mut err = None;
    let v = integrate(
        |s| match ring_density(u, c, s) {
            Ok(d) => d,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        a,
        b,
        0.0,
        REL_TOL,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Area of D_t(c). Unit log-radius shells are added inwards until a shell
/// no longer changes the total.
pub fn disk_area<F: ScalarField + ?Sized>(u: &F, c: Point, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("disk radius must be positive"));
    }
    check_contains(u, c, t)?;
    let mut total = 0.0;
    let mut b = t.ln();
    loop {
        let shell = log_chunk(u, c, b - 1.0, b)?;
        total += shell;
        b -= 1.0;
        if shell <= 1e-17 * total || b < -700.0 {
            return Ok(total);
        }
    }
}

/// Area of the whole plane by doubling the radius until the increment
/// drops below `tol`.
pub fn plane_area<F: ScalarField + ?Sized>(u: &F, c: Point, tol: f64) -> Result<f64> {
    let mut r = 1.0;
    let mut total = disk_area(u, c, r)?;
    for _ in 0..60 {
        let inc = annulus_area(u, c, r, 2.0 * r)?;
        total += inc;
        r *= 2.0;
        if inc < tol {
            return Ok(total);
        }
    }
    Err(CmlError::Quadrature(format!(
        "plane area still growing at radius {r:e}"
    )))
}

/// Mean of `u` over D_t(c).
pub fn disk_mean<F: ScalarField + ?Sized>(u: &F, c: Point, t: f64) -> Result<f64> {
    check_contains(u, c, t)?;
    let inner = |rho: f64| {
        integrate(
            |th| u.value(c + Point::polar(rho, th)),
            0.0,
            2.0 * PI,
            0.0,
            1e-11,
        )
        .map(|v| v * rho)
    };
    let mut err = None;
    let v = integrate(
        |rho| match inner(rho) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        0.0,
        t,
        0.0,
        1e-11,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(v / (PI * t * t)),
    }
}

/// r^{-1} ∫_{D_r(c)} |∇u| with a fixed polar product rule.
pub fn gradient_l1<F: ScalarField + ?Sized>(u: &F, c: Point, r: f64) -> f64 {
    let (x, w) = gauss_legendre(32);
    let m = 64;
    let mut total = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let rho = 0.5 * r * (xi + 1.0);
        let ring: f64 = (0..m)
            .map(|j| {
                u.gradient(c + Point::polar(rho, 2.0 * PI * (j as f64 + 0.5) / m as f64))
                    .norm()
            })
            .sum::<f64>()
            * 2.0
            * PI
            / m as f64;
        total += 0.5 * r * wi * ring * rho;
    }
    total / r
}

fn check_contains<F: ScalarField + ?Sized>(u: &F, c: Point, t: f64) -> Result<()> {
    for j in 0..8 {
        let p = c + Point::polar(t, PI * j as f64 / 4.0);
        if !u.contains(p) {
            return Err(CmlError::OutsideChart { x: p.x, y: p.y });
        }
    }
    Ok(())
}

/// A conformal factor on the flat cylinder S¹ × ℝ, as v(θ, t).
pub trait CylinderField: Send + Sync {
    fn value(&self, theta: f64, t: f64) -> f64;
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> CylinderField for F {
    fn value(&self, theta: f64, t: f64) -> f64 {
        self(theta, t)
    }
}

/// The cylinder picture v(θ, t) = u(c + e^{−t}e^{iθ}) − t of a planar field.
pub struct CylinderView<F> {
    pub inner: F,
    pub center: Point,
}

impl<F: ScalarField> CylinderField for CylinderView<F> {
    fn value(&self, theta: f64, t: f64) -> f64 {
        self.inner
            .value(self.center + Point::polar((-t).exp(), theta))
            - t
    }
}

/// Area of S¹ × [t0, t1] for e^{2v}(dt² + dθ²).
pub fn cylinder_area<V: CylinderField + ?Sized>(v: &V, t0: f64, t1: f64) -> Result<f64> {
    let mut err = None;
    let total = integrate(
        |t| match integrate(
            |th| (2.0 * v.value(th, t)).exp(),
            0.0,
            2.0 * PI,
            0.0,
            REL_TOL,
        ) {
            Ok(x) => x,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        t0,
        t1,
        0.0,
        REL_TOL,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// ∫_{S¹×{t}} ∂v/∂t by a fourth-order difference and the trapezoid rule.
pub fn cylinder_flux<V: CylinderField + ?Sized>(v: &V, t: f64) -> f64 {
    let h = 1e-3;
    let m = 128;
    (0..m)
        .map(|j| {
            let th = 2.0 * PI * j as f64 / m as f64;
            (8.0 * (v.value(th, t + h) - v.value(th, t - h))
                - (v.value(th, t + 2.0 * h) - v.value(th, t - 2.0 * h)))
                / (12.0 * h)
        })
        .sum::<f64>()
        * 2.0
        * PI
        / m as f64
}
