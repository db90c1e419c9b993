//! Divisors, signed curvature measures, and the distributional identities
//! they satisfy: pairing, circle flux, residues, annular Gauss–Bonnet.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CmlError, Result};
use crate::field::{Chart, Field, Kelvin, ScalarField};
use crate::point::Point;
use crate::spectral::Spectral;

/// Weighted points on the unit torus. Weight -1 marks a cusp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divisor {
    points: Vec<Point>,
    weights: Vec<f64>,
}

/// Minimum separation between distinct atoms of a divisor.
pub const ATOM_SEPARATION: f64 = 1e-9;

impl Divisor {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(invalid("divisor needs one weight per point"));
        }
        for (k, (p, &b)) in points.iter().zip(&weights).enumerate() {
            if !p.is_finite() || !(0.0..1.0).contains(&p.x) || !(0.0..1.0).contains(&p.y) {
                return Err(invalid(format!(
                    "atom {k} is not in the fundamental square [0,1)^2"
                )));
            }
            if !b.is_finite() || b < -1.0 {
                return Err(invalid(format!("atom {k} has weight {b} below -1")));
            }
            for q in &points[..k] {
                if (*p - *q).wrap_torus().norm() < ATOM_SEPARATION {
                    return Err(invalid(format!("atom {k} coincides with an earlier atom")));
                }
            }
        }
        Ok(Divisor { points, weights })
    }

    pub fn empty() -> Self {
        Divisor {
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.points
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Divisor::new(self.points.clone(), weights)
    }
}

/// The closed surfaces handled here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Torus,
    Sphere,
}

impl Surface {
    pub fn euler_characteristic(self) -> f64 {
        match self {
            Surface::Torus => 0.0,
            Surface::Sphere => 2.0,
        }
    }
}

/// χ(Σ, β) = χ(Σ) + Σ β_i.
pub fn euler_characteristic(surface: Surface, divisor: &Divisor) -> f64 {
    surface.euler_characteristic() + divisor.weight_sum()
}

/// A finite signed measure: planar atoms plus an optional absolutely
/// continuous part given by a density on a grid.
#[derive(Debug, Clone)]
pub struct SignedMeasureSample {
    pub atoms: Vec<(Point, f64)>,
    pub density: Option<Field>,
}

/// Default mass above which a disk is reported as concentrating curvature.
pub const CONCENTRATION_THRESHOLD: f64 = 1.0;

impl SignedMeasureSample {
    pub fn new(atoms: Vec<(Point, f64)>, density: Option<Field>) -> Result<Self> {
        if atoms.iter().any(|(p, m)| !p.is_finite() || !m.is_finite()) {
            return Err(invalid("atoms must be finite"));
        }
        if let Some(d) = &density {
            if matches!(d.chart(), Chart::Torus) {
                return Err(invalid("planar measures need a disk or annulus chart"));
            }
        }
        Ok(SignedMeasureSample { atoms, density })
    }

    pub fn total_variation(&self) -> f64 {
        let a: f64 = self.atoms.iter().map(|(_, m)| m.abs()).sum();
        let d = self.density.as_ref().map_or(0.0, |f| {
            f.node_weights()
                .iter()
                .zip(f.values())
                .map(|(w, v)| w * v.abs())
                .sum()
        });
        a + d
    }

    pub fn total_mass(&self) -> f64 {
        let a: f64 = self.atoms.iter().map(|(_, m)| m).sum();
        let d = self.density.as_ref().map_or(0.0, |f| {
            f.node_weights()
                .iter()
                .zip(f.values())
                .map(|(w, v)| w * v)
                .sum()
        });
        a + d
    }
}

/// ⟨u, φ⟩_K0 = ∫ (φ K0 − u Δφ): the weak form of −Δu = K0 tested on φ.
/// Δ is taken spectrally, so fields must be periodic on their chart.
pub fn pairing(u: &Field, phi: &Field, k0: &Field) -> Result<f64> {
    if u.n() != phi.n() || u.n() != k0.n() || u.chart() != phi.chart() || u.chart() != k0.chart() {
        return Err(invalid("pairing needs all three fields on one grid"));
    }
    let period = match u.chart() {
        Chart::Torus => 1.0,
        Chart::Disk { radius } => 2.0 * radius,
        Chart::Annulus { .. } => return Err(invalid("pairing is not defined on polar grids")),
    };
    let h = period / u.n() as f64;
    let lap = Spectral::new(u.n(), period).laplacian(phi.values());
    let s: f64 = (0..u.values().len())
        .map(|k| phi.values()[k] * k0.values()[k] - u.values()[k] * lap[k])
        .sum();
    Ok(s * h * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxSample {
    pub r: f64,
    pub flux: f64,
}

/// Flux values on strictly increasing radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxProfile {
    samples: Vec<FluxSample>,
}

impl FluxProfile {
    pub fn new(mut samples: Vec<FluxSample>) -> Result<Self> {
        samples.sort_by(|a, b| a.r.total_cmp(&b.r));
        if samples.windows(2).any(|w| w[0].r >= w[1].r) {
            return Err(invalid("flux radii must be distinct"));
        }
        Ok(FluxProfile { samples })
    }

    pub fn samples(&self) -> &[FluxSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Φ(r) = ∮_{∂D_r(c)} ∂u/∂ν for each radius, trapezoidal in angle.
pub fn flux_profile<F: ScalarField + ?Sized>(
    u: &F,
    center: Point,
    radii: &[f64],
) -> Result<FluxProfile> {
    if radii.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("flux radii must be strictly increasing"));
    }
    let samples = radii
        .iter()
        .map(|&r| flux_at(u, center, r).map(|flux| FluxSample { r, flux }))
        .collect::<Result<Vec<_>>>()?;
    FluxProfile::new(samples)
}

fn flux_at<F: ScalarField + ?Sized>(u: &F, c: Point, r: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(invalid(format!("flux radius {r} must be positive")));
    }
    let m = u.angular_nodes(r);
    let d = 2.0 * u.radial_step(r).min(0.5 * r);
    let mut total = 0.0;
    for j in 0..m {
        let t = 2.0 * PI * j as f64 / m as f64;
        let dir = Point::new(t.cos(), t.sin());
        let (a, b) = (c + dir * (r - d), c + dir * (r + d));
        if !u.contains(a) || !u.contains(b) {
            let p = c + dir * r;
            return Err(CmlError::OutsideChart { x: p.x, y: p.y });
        }
        total += u.radial_derivative(c, dir, r);
    }
    let flux = 2.0 * PI * r * total / m as f64;
    if flux.is_finite() {
        Ok(flux)
    } else {
        Err(invalid(format!("flux at r = {r} is not finite")))
    }
}

/// ∫_{D_t \ D_s} dK = Φ(s) − Φ(t) for the curvature measure of e^{2u}|dz|^2.
pub fn gauss_bonnet_annulus<F: ScalarField + ?Sized>(
    u: &F,
    center: Point,
    s: f64,
    t: f64,
) -> Result<f64> {
    if !(s < t) {
        return Err(invalid("annulus needs inner radius below outer radius"));
    }
    Ok(flux_at(u, center, s)? - flux_at(u, center, t)?)
}

#[derive(Debug, Clone, Copy)]
pub struct ResidueOptions {
    /// Largest radius in the dyadic walk.
    pub r_start: f64,
    /// Walk stops below this radius.
    pub r_min: f64,
    /// Three consecutive values must agree within `rel_tol * (1 + |flux|)`.
    pub rel_tol: f64,
}

impl Default for ResidueOptions {
    fn default() -> Self {
        ResidueOptions {
            r_start: 0.25,
            r_min: 1e-12,
            rel_tol: 1e-3,
        }
    }
}

impl ResidueOptions {
    /// Sensible walk for a grid field: stop a few cells from the centre.
    pub fn for_grid(field: &Field, r_start: f64) -> Self {
        let r_min = match field.chart() {
            Chart::Annulus { r_in, .. } => r_in * (1.0 + 4.0 * field.spacing()),
            _ => 4.0 * field.spacing(),
        };
        ResidueOptions {
            r_start,
            r_min,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Residue {
    pub value: f64,
    pub profile: FluxProfile,
}

/// lim_{r→0} Φ(r)/2π, declared once the dyadic flux profile stabilizes.
pub fn residue<F: ScalarField + ?Sized>(
    u: &F,
    center: Point,
    opts: ResidueOptions,
) -> Result<Residue> {
    let mut profile = Vec::new();
    let mut r = opts.r_start;
    while r >= opts.r_min {
        let flux = flux_at(u, center, r)?;
        profile.push(FluxSample { r, flux });
        if profile.len() >= 3 {
            let tail = &profile[profile.len() - 3..];
            let scale = 1.0 + flux.abs();
            let spread = tail
                .iter()
                .map(|s| (s.flux - flux).abs())
                .fold(0.0, f64::max);
            if spread <= opts.rel_tol * scale {
                let profile = FluxProfile::new(profile)?;
                return Ok(Residue {
                    value: flux / (2.0 * PI),
                    profile,
                });
            }
        }
        r *= 0.5;
    }
    Err(CmlError::Inconclusive {
        profile: FluxProfile::new(profile)?,
    })
}

/// Residue of the Kelvin transform at the centre, i.e. the behaviour of `u`
/// at infinity.
pub fn residue_at_infinity<F: ScalarField>(
    u: F,
    center: Point,
    opts: ResidueOptions,
) -> Result<Residue> {
    residue(&Kelvin { inner: u, center }, center, opts)
}

/// Kelvin transform of a polar grid about its centre.
pub fn kelvin_transform(u: &Field, center: Point) -> Result<Field> {
    if center != Point::ORIGIN {
        return Err(invalid("polar grids are centred at the chart origin"));
    }
    u.kelvin()
}

/// I_μ(x) = −(1/2π) ∫ log|x − y| dμ(y) sampled on the nodes of `grid`.
///
/// A density must share the target grid (disk chart); atoms may sit anywhere
/// except on a node.
pub fn newtonian_potential(mu: &SignedMeasureSample, n: usize, chart: Chart) -> Result<Field> {
    let target = Field::constant(n, chart, 0.0)?;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let x = target.node(i, j);
            let mut s = 0.0;
            for &(p, m) in &mu.atoms {
                let d = (x - p).norm();
                if d < 1e-14 {
                    return Err(invalid("potential evaluated at an atom"));
                }
                s -= m * d.ln() / (2.0 * PI);
            }
            values[i * n + j] = s;
        }
    }
    if let Some(rho) = &mu.density {
        if rho.n() != n || rho.chart() != chart {
            return Err(invalid("density must live on the target grid"));
        }
        let Chart::Disk { radius } = chart else {
            return Err(invalid("density convolution needs a disk chart"));
        };
        let conv = log_convolution(rho, 2.0 * radius / n as f64)?;
        for (v, c) in values.iter_mut().zip(conv) {
            *v += c;
        }
    }
    Field::new(n, chart, values)
}

/// −(1/2π) Σ_y h² ρ(y) log|x − y| by zero-padded FFT convolution. The
/// self-cell uses the exact mean of log over a square cell.
fn log_convolution(rho: &Field, h: f64) -> Result<Vec<f64>> {
    let n = rho.n();
    let m = 2 * n;
    let spec = Spectral::new(m, 1.0);
    let mut kernel = vec![0.0; m * m];
    let half = 0.5 * h;
    // Mean of log|z| over the square [-a, a]^2.
    let self_cell = half.ln() + (2f64.ln() - 3.0 + PI / 2.0) / 2.0;
    for a in 0..m {
        for b in 0..m {
            let di = if a < n { a as f64 } else { a as f64 - m as f64 };
            let dj = if b < n { b as f64 } else { b as f64 - m as f64 };
            let r = h * di.hypot(dj);
            kernel[a * m + b] = if r == 0.0 { self_cell } else { r.ln() };
        }
    }
    let mut padded = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            padded[i * m + j] = rho.get(i, j) * h * h;
        }
    }
    let fk = spec.forward(&kernel);
    let fp = spec.forward(&padded);
    let prod = fk.iter().zip(&fp).map(|(a, b)| a * b).collect();
    let full = spec.inverse_real(prod);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = -full[i * m + j] / (2.0 * PI);
        }
    }
    Ok(out)
}
