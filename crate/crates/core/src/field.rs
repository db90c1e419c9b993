//! Sampled scalar fields, their charts, and the `ScalarField` abstraction
//! shared by grid data and closed-form test fields.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CmlError, Result};
use crate::point::Point;

/// Coordinate patch a grid lives on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Chart {
    /// Unit flat torus, nodes at (j/n, i/n).
    Torus,
    /// Square [-R, R)^2 containing the disk of radius R, cell-centred nodes.
    Disk { radius: f64 },
    /// Polar grid: rows log-spaced in r from `r_in` to `r_out` (inclusive),
    /// columns equispaced in angle.
    Annulus { r_in: f64, r_out: f64 },
}

impl Chart {
    fn validate(&self) -> Result<()> {
        match *self {
            Chart::Torus => Ok(()),
            Chart::Disk { radius } if radius.is_finite() && radius > 0.0 => Ok(()),
            Chart::Annulus { r_in, r_out }
                if r_in.is_finite() && r_out.is_finite() && 0.0 < r_in && r_in < r_out =>
            {
                Ok(())
            }
            _ => Err(invalid(format!("bad chart parameters {self:?}"))),
        }
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Chart::Torus => write!(f, "torus"),
            Chart::Disk { radius } => write!(f, "disk {radius:.16e}"),
            Chart::Annulus { r_in, r_out } => write!(f, "annulus {r_in:.16e} {r_out:.16e}"),
        }
    }
}

impl std::str::FromStr for Chart {
    type Err = CmlError;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| invalid(format!("bad number {t:?}")))
        };
        let chart = match parts.as_slice() {
            ["torus"] => Chart::Torus,
            ["disk", r] => Chart::Disk { radius: num(r)? },
            ["annulus", a, b] => Chart::Annulus {
                r_in: num(a)?,
                r_out: num(b)?,
            },
            _ => return Err(invalid(format!("unknown chart descriptor {s:?}"))),
        };
        chart.validate()?;
        Ok(chart)
    }
}

/// Anything that can be evaluated pointwise, with derivatives by centred
/// differences unless the implementor knows better.
pub trait ScalarField: Send + Sync {
    fn value(&self, p: Point) -> f64;

    fn contains(&self, _p: Point) -> bool {
        true
    }

    /// Step for centred differences along a ray at distance `r` from the
    /// point being studied.
    fn radial_step(&self, r: f64) -> f64 {
        1e-3 * r
    }

    /// Trapezoidal node count for circle integrals at radius `r`.
    fn angular_nodes(&self, _r: f64) -> usize {
        256
    }

    /// Derivative along the unit vector `dir` at `c + r * dir`, fourth-order
    /// centred stencil.
    fn radial_derivative(&self, c: Point, dir: Point, r: f64) -> f64 {
        let d = self.radial_step(r).min(0.25 * r);
        let f = |t: f64| self.value(c + dir * (r + t));
        (8.0 * (f(d) - f(-d)) - (f(2.0 * d) - f(-2.0 * d))) / (12.0 * d)
    }

    fn gradient(&self, p: Point) -> Point {
        let d = self.radial_step(1.0);
        let ex = Point::new(d, 0.0);
        let ey = Point::new(0.0, d);
        Point::new(
            (self.value(p + ex) - self.value(p - ex)) / (2.0 * d),
            (self.value(p + ey) - self.value(p - ey)) / (2.0 * d),
        )
    }
}

impl<T: ScalarField + ?Sized> ScalarField for &T {
    fn value(&self, p: Point) -> f64 {
        (**self).value(p)
    }
    fn contains(&self, p: Point) -> bool {
        (**self).contains(p)
    }
    fn radial_step(&self, r: f64) -> f64 {
        (**self).radial_step(r)
    }
    fn angular_nodes(&self, r: f64) -> usize {
        (**self).angular_nodes(r)
    }
    fn radial_derivative(&self, c: Point, dir: Point, r: f64) -> f64 {
        (**self).radial_derivative(c, dir, r)
    }
    fn gradient(&self, p: Point) -> Point {
        (**self).gradient(p)
    }
}

impl<T: ScalarField + ?Sized> ScalarField for Box<T> {
    fn value(&self, p: Point) -> f64 {
        (**self).value(p)
    }
    fn contains(&self, p: Point) -> bool {
        (**self).contains(p)
    }
    fn radial_step(&self, r: f64) -> f64 {
        (**self).radial_step(r)
    }
    fn angular_nodes(&self, r: f64) -> usize {
        (**self).angular_nodes(r)
    }
    fn radial_derivative(&self, c: Point, dir: Point, r: f64) -> f64 {
        (**self).radial_derivative(c, dir, r)
    }
    fn gradient(&self, p: Point) -> Point {
        (**self).gradient(p)
    }
}

/// A closed-form field, optionally restricted to a disk.
pub struct FnField<F> {
    f: F,
    support: Option<(Point, f64)>,
}

impl<F: Fn(Point) -> f64 + Send + Sync> FnField<F> {
    pub fn new(f: F) -> Self {
        FnField { f, support: None }
    }

    pub fn on_disk(f: F, center: Point, radius: f64) -> Self {
        FnField {
            f,
            support: Some((center, radius)),
        }
    }
}

impl<F: Fn(Point) -> f64 + Send + Sync> ScalarField for FnField<F> {
    fn value(&self, p: Point) -> f64 {
        (self.f)(p)
    }
    fn contains(&self, p: Point) -> bool {
        match self.support {
            Some((c, r)) => (p - c).norm() <= r,
            None => true,
        }
    }
}

/// y ↦ u(x + r y) + log r, the blow-up of `u` at scale `r` around `x`.
pub struct Rescaled<F> {
    pub inner: F,
    pub center: Point,
    pub scale: f64,
}

impl<F: ScalarField> ScalarField for Rescaled<F> {
    fn value(&self, y: Point) -> f64 {
        self.inner.value(self.center + y * self.scale) + self.scale.ln()
    }
    fn contains(&self, y: Point) -> bool {
        self.inner.contains(self.center + y * self.scale)
    }
    fn radial_step(&self, r: f64) -> f64 {
        self.inner.radial_step(r * self.scale) / self.scale
    }
    fn angular_nodes(&self, r: f64) -> usize {
        self.inner.angular_nodes(r * self.scale)
    }
}

/// Inversion in the unit circle about `center`: u'(x) = u(c + x/|x|^2) - 2 log|x|,
/// with x measured from `center`.
pub struct Kelvin<F> {
    pub inner: F,
    pub center: Point,
}

impl<F: ScalarField> Kelvin<F> {
    fn image(&self, p: Point) -> Point {
        let d = p - self.center;
        self.center + d * (1.0 / d.norm_sq())
    }
}

impl<F: ScalarField> ScalarField for Kelvin<F> {
    fn value(&self, p: Point) -> f64 {
        let d = (p - self.center).norm();
        self.inner.value(self.image(p)) - 2.0 * d.ln()
    }
    fn contains(&self, p: Point) -> bool {
        p != self.center && self.inner.contains(self.image(p))
    }
}

/// Pointwise sum of two fields.
pub struct Sum<A, B>(pub A, pub B);

impl<A: ScalarField, B: ScalarField> ScalarField for Sum<A, B> {
    fn value(&self, p: Point) -> f64 {
        self.0.value(p) + self.1.value(p)
    }
    fn contains(&self, p: Point) -> bool {
        self.0.contains(p) && self.1.contains(p)
    }
    fn radial_step(&self, r: f64) -> f64 {
        self.0.radial_step(r).max(self.1.radial_step(r))
    }
}

/// Real samples on an n×n grid over a chart. Index `i * n + j` holds row
/// `i` (y or radius) and column `j` (x or angle).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    n: usize,
    chart: Chart,
    values: Vec<f64>,
}

pub(crate) fn check_resolution(n: usize) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return Err(invalid(format!(
            "grid size {n} must be a power of two and at least 8"
        )));
    }
    Ok(())
}

impl Field {
    pub fn new(n: usize, chart: Chart, values: Vec<f64>) -> Result<Self> {
        check_resolution(n)?;
        chart.validate()?;
        if values.len() != n * n {
            return Err(invalid(format!(
                "expected {} samples, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("sample {k} is not finite")));
        }
        Ok(Field { n, chart, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(n: usize, chart: Chart, f: impl Fn(Point) -> f64) -> Result<Self> {
        check_resolution(n)?;
        chart.validate()?;
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(node(chart, n, i, j)));
            }
        }
        Field::new(n, chart, values)
    }

    pub fn constant(n: usize, chart: Chart, c: f64) -> Result<Self> {
        Field::new(n, chart, vec![c; n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Node spacing in the chart's native coordinates: 1/n on the torus,
    /// 2R/n on a disk chart, and the log-radius step on an annulus.
    pub fn spacing(&self) -> f64 {
        match self.chart {
            Chart::Torus => 1.0 / self.n as f64,
            Chart::Disk { radius } => 2.0 * radius / self.n as f64,
            Chart::Annulus { r_in, r_out } => (r_out / r_in).ln() / (self.n - 1) as f64,
        }
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        node(self.chart, self.n, i, j)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(
            self.n,
            self.chart,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if self.n != other.n || self.chart != other.chart {
            return Err(invalid("fields live on different grids"));
        }
        let v = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field::new(self.n, self.chart, v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Bilinear interpolation; fails outside the node hull.
    pub fn interpolate(&self, p: Point) -> Result<f64> {
        let n = self.n;
        let nf = n as f64;
        match self.chart {
            Chart::Torus => {
                let q = p.reduce_torus();
                let (fx, fy) = (q.x * nf, q.y * nf);
                let (j0, i0) = (fx.floor() as usize % n, fy.floor() as usize % n);
                let (tx, ty) = (fx - fx.floor(), fy - fy.floor());
                let (j1, i1) = ((j0 + 1) % n, (i0 + 1) % n);
                Ok(self.blend(i0, i1, j0, j1, tx, ty))
            }
            Chart::Disk { radius } => {
                let h = 2.0 * radius / nf;
                let fx = (p.x + radius) / h - 0.5;
                let fy = (p.y + radius) / h - 0.5;
                let top = (n - 1) as f64;
                if !(0.0..=top).contains(&fx) || !(0.0..=top).contains(&fy) {
                    return Err(CmlError::OutsideChart { x: p.x, y: p.y });
                }
                let j0 = (fx.floor() as usize).min(n - 2);
                let i0 = (fy.floor() as usize).min(n - 2);
                Ok(self.blend(i0, i0 + 1, j0, j0 + 1, fx - j0 as f64, fy - i0 as f64))
            }
            Chart::Annulus { r_in, .. } => {
                let r = p.norm();
                let fs = (r / r_in).ln() / self.spacing();
                if !(r > 0.0) || fs < -1e-9 || fs > (n - 1) as f64 + 1e-9 {
                    return Err(CmlError::OutsideChart { x: p.x, y: p.y });
                }
                let fs = fs.clamp(0.0, (n - 1) as f64);
                let i0 = (fs.floor() as usize).min(n - 2);
                let theta = p.y.atan2(p.x).rem_euclid(2.0 * PI);
                let ft = theta / (2.0 * PI) * nf;
                let j0 = ft.floor() as usize % n;
                Ok(self.blend(
                    i0,
                    i0 + 1,
                    j0,
                    (j0 + 1) % n,
                    ft - ft.floor(),
                    fs - i0 as f64,
                ))
            }
        }
    }

    fn blend(&self, i0: usize, i1: usize, j0: usize, j1: usize, tx: f64, ty: f64) -> f64 {
        let n = self.n;
        let v = &self.values;
        let a = v[i0 * n + j0] * (1.0 - tx) + v[i0 * n + j1] * tx;
        let b = v[i1 * n + j0] * (1.0 - tx) + v[i1 * n + j1] * tx;
        a * (1.0 - ty) + b * ty
    }

    /// Quadrature weight (area element) of each node.
    pub fn node_weights(&self) -> Vec<f64> {
        let n = self.n;
        match self.chart {
            Chart::Torus => vec![1.0 / (n * n) as f64; n * n],
            Chart::Disk { radius } => {
                let h = 2.0 * radius / n as f64;
                (0..n * n)
                    .map(|k| {
                        if self.node(k / n, k % n).norm() <= radius {
                            h * h
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            Chart::Annulus { .. } => {
                let ds = self.spacing();
                let dt = 2.0 * PI / n as f64;
                (0..n * n)
                    .map(|k| {
                        let i = k / n;
                        let r = self.node(i, 0).norm();
                        let end = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                        end * ds * dt * r * r
                    })
                    .collect()
            }
        }
    }

    /// ∫ e^{2u} over the chart's domain.
    pub fn area(&self) -> f64 {
        self.node_weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * (2.0 * v).exp())
            .sum()
    }

    /// Inversion about the annulus centre, done by exact reindexing.
    pub fn kelvin(&self) -> Result<Field> {
        let Chart::Annulus { r_in, r_out } = self.chart else {
            return Err(invalid(
                "Kelvin transform of a grid needs an annulus chart centred at the point",
            ));
        };
        let n = self.n;
        let chart = Chart::Annulus {
            r_in: 1.0 / r_out,
            r_out: 1.0 / r_in,
        };
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            let r_new = node(chart, n, i, 0).norm();
            let src = n - 1 - i;
            for j in 0..n {
                values[i * n + j] = self.values[src * n + j] - 2.0 * r_new.ln();
            }
        }
        Field::new(n, chart, values)
    }
}

pub(crate) fn node(chart: Chart, n: usize, i: usize, j: usize) -> Point {
    let nf = n as f64;
    match chart {
        Chart::Torus => Point::new(j as f64 / nf, i as f64 / nf),
        Chart::Disk { radius } => {
            let h = 2.0 * radius / nf;
            Point::new(
                -radius + (j as f64 + 0.5) * h,
                -radius + (i as f64 + 0.5) * h,
            )
        }
        Chart::Annulus { r_in, r_out } => {
            let r = annulus_radius(r_in, r_out, n, i);
            Point::polar(r, 2.0 * PI * j as f64 / nf)
        }
    }
}

fn annulus_radius(r_in: f64, r_out: f64, n: usize, i: usize) -> f64 {
    // Pin both ends exactly so Kelvin reindexing lands on the same nodes.
    if i == 0 {
        r_in
    } else if i == n - 1 {
        r_out
    } else {
        r_in * ((r_out / r_in).ln() * i as f64 / (n - 1) as f64).exp()
    }
}

impl ScalarField for Field {
    fn value(&self, p: Point) -> f64 {
        self.interpolate(p).unwrap_or(f64::NAN)
    }

    fn contains(&self, p: Point) -> bool {
        self.interpolate(p).is_ok()
    }

    fn radial_step(&self, r: f64) -> f64 {
        match self.chart {
            Chart::Annulus { .. } => r * self.spacing(),
            _ => self.spacing(),
        }
    }

    fn radial_derivative(&self, c: Point, dir: Point, r: f64) -> f64 {
        let d = self.radial_step(r).min(0.5 * r);
        (self.value(c + dir * (r + d)) - self.value(c + dir * (r - d))) / (2.0 * d)
    }

    fn angular_nodes(&self, r: f64) -> usize {
        match self.chart {
            Chart::Annulus { .. } => self.n,
            _ => crate::quad::circle_nodes(r, (1.0 / self.spacing()).round() as usize),
        }
    }
}

pub mod io {
    //! `CMLGRID1` binary grid files.
    use std::fs::File;
    use std::io::{BufRead, BufReader, BufWriter, Read, Write};
    use std::path::Path;

    use super::{Chart, Field};
    use crate::error::{CmlError, Result};

    const MAGIC: &[u8; 8] = b"CMLGRID1";

    pub fn write_to(field: &Field, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(field.n() as u32).to_le_bytes())?;
        for v in field.values() {
            w.write_all(&v.to_le_bytes())?;
        }
        writeln!(w, "{}", field.chart())?;
        Ok(())
    }

    pub fn write_grid(field: &Field, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_to(field, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from(r: impl Read, path: &Path) -> Result<Field> {
        let bad = |reason: &str| CmlError::GridFormat {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("wrong magic"));
        }
        let mut nb = [0u8; 4];
        r.read_exact(&mut nb).map_err(|_| bad("truncated header"))?;
        let n = u32::from_le_bytes(nb) as usize;
        if n == 0 || n > 1 << 14 {
            return Err(bad("implausible grid size"));
        }
        let mut values = vec![0.0; n * n];
        let mut buf = [0u8; 8];
        for v in values.iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|_| bad("truncated sample block"))?;
            *v = f64::from_le_bytes(buf);
        }
        let mut line = String::new();
        r.read_line(&mut line)?;
        let chart: Chart = line
            .trim()
            .parse()
            .map_err(|e: CmlError| bad(&e.to_string()))?;
        Field::new(n, chart, values).map_err(|e| bad(&e.to_string()))
    }

    pub fn read_grid(path: &Path) -> Result<Field> {
        read_from(File::open(path)?, path)
    }
}
