//! Damped Newton solver for −Δv = K e^{2(S+v)} − 2πΣβ on the unit torus.
//!
//! e^{2S} is never sampled next to an atom. Each node carries a weight
//! ω_j = (1/h²)∫_{cell j} e^{2S}, computed in polar coordinates about the
//! atom with the factor r^{2β} integrated exactly, so the discrete area
//! Σ h² ω_j e^{2v_j} obeys Gauss–Bonnet to round-off.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CmlError, Result};
use crate::field::{Chart, Field, ScalarField};
use crate::green::{is_near, SingularSplit, NEAR_CELLS};
use crate::measure::{euler_characteristic, Surface};
use crate::point::Point;
use crate::quad;
use crate::spectral::Spectral;

static CURVATURE_VIOLATIONS: AtomicUsize = AtomicUsize::new(0);

/// Number of times any CG solve in this process met pᵀJp ≤ 0.
pub fn curvature_violations() -> usize {
    CURVATURE_VIOLATIONS.load(Ordering::Relaxed)
}

/// Prescribed curvature with its pinching bounds lower ≤ K ≤ upper < 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSpec {
    kind: CurvatureKind,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum CurvatureKind {
    Constant(f64),
    Grid(Field),
}

impl CurvatureSpec {
    pub fn constant(k: f64) -> Result<Self> {
        if !(k.is_finite() && k < 0.0) {
            return Err(invalid(format!(
                "curvature {k} must be finite and negative"
            )));
        }
        Ok(CurvatureSpec {
            kind: CurvatureKind::Constant(k),
            lower: k,
            upper: k,
        })
    }

    pub fn grid(k: Field) -> Result<Self> {
        if k.chart() != Chart::Torus {
            return Err(invalid("curvature grid must live on the torus"));
        }
        let lower = k.values().iter().copied().fold(f64::INFINITY, f64::min);
        let upper = k.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if upper >= 0.0 {
            return Err(invalid(format!(
                "curvature grid reaches {upper}, must stay negative"
            )));
        }
        Ok(CurvatureSpec {
            kind: CurvatureKind::Grid(k),
            lower,
            upper,
        })
    }

    /// Declares wider bounds than the data's own range.
    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Result<Self> {
        if !(lower <= self.lower && self.upper <= upper && upper < 0.0) {
            return Err(invalid(format!(
                "bounds [{lower}, {upper}] do not enclose the curvature range [{}, {}] below zero",
                self.lower, self.upper
            )));
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.kind {
            CurvatureKind::Constant(k) => Some(k),
            CurvatureKind::Grid(_) => None,
        }
    }

    /// K / c for c > 0.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("scale must be positive"));
        }
        let kind = match &self.kind {
            CurvatureKind::Constant(k) => CurvatureKind::Constant(k / c),
            CurvatureKind::Grid(f) => CurvatureKind::Grid(f.map(|k| k / c)?),
        };
        Ok(CurvatureSpec {
            kind,
            lower: self.lower / c,
            upper: self.upper / c,
        })
    }

    pub fn sample(&self, n: usize) -> Result<Vec<f64>> {
        match &self.kind {
            CurvatureKind::Constant(k) => Ok(vec![*k; n * n]),
            CurvatureKind::Grid(f) if f.n() == n => Ok(f.values().to_vec()),
            CurvatureKind::Grid(f) => Err(invalid(format!(
                "curvature grid is {}x{}, problem grid is {n}x{n}",
                f.n(),
                f.n()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Target sup-norm of the residual.
    pub tol: f64,
    pub max_newton: usize,
    pub max_cg: usize,
    /// CG stops when ‖r‖₂ ≤ cg_rel_tol·‖b‖₂.
    pub cg_rel_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_newton: 60,
            max_cg: 2000,
            cg_rel_tol: 1e-12,
        }
    }
}

/// The discretized equation on a fixed grid.
#[derive(Debug, Clone)]
pub struct Problem {
    n: usize,
    spec: CurvatureSpec,
    split: SingularSplit,
    curvature: Vec<f64>,
    weights: Vec<f64>,
    forcing: Option<Vec<f64>>,
    spectral: Spectral,
}

impl Problem {
    /// Requires every weight above −1; cusps are reached by continuation.
    pub fn new(spec: CurvatureSpec, split: SingularSplit) -> Result<Self> {
        if let Some(b) = split.divisor().weights().iter().find(|&&b| b <= -1.0) {
            return Err(invalid(format!(
                "direct solves need weights above -1, got {b}"
            )));
        }
        let n = split.n();
        let curvature = spec.sample(n)?;
        let weights = cell_weights(&split)?;
        Ok(Problem {
            n,
            spec,
            split,
            curvature,
            weights,
            forcing: None,
            spectral: Spectral::new(n, 1.0),
        })
    }

    /// Adds a right-hand side f: F(v) = −Δv − Kωe^{2v} + 2πΣβ − f.
    pub fn with_forcing(mut self, f: &Field) -> Result<Self> {
        if f.n() != self.n || f.chart() != Chart::Torus {
            return Err(invalid("forcing must share the problem grid"));
        }
        self.forcing = Some(f.values().to_vec());
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn split(&self) -> &SingularSplit {
        &self.split
    }

    pub fn spec(&self) -> &CurvatureSpec {
        &self.spec
    }

    /// ω_j, the cell mean of e^{2S}.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn chi(&self) -> f64 {
        euler_characteristic(Surface::Torus, self.split.divisor())
    }

    pub fn residual(&self, v: &[f64]) -> Result<Vec<f64>> {
        let lap = self.spectral.laplacian(v);
        let shift = 2.0 * PI * self.split.beta_sum();
        let mut out = Vec::with_capacity(v.len());
        for k in 0..v.len() {
            let mut r = -lap[k] - self.curvature[k] * self.weights[k] * (2.0 * v[k]).exp() + shift;
            if let Some(f) = &self.forcing {
                r -= f[k];
            }
            out.push(r);
        }
        if out.iter().any(|r| !r.is_finite()) {
            return Err(invalid("residual overflowed: e^{2u} is not finite"));
        }
        Ok(out)
    }

    /// Jacobian of the residual at `v` applied to `dir`.
    pub fn apply_jacobian(&self, v: &[f64], dir: &[f64]) -> Vec<f64> {
        let c = self.linear_coefficient(v);
        self.apply_linear(&c, dir)
    }

    fn linear_coefficient(&self, v: &[f64]) -> Vec<f64> {
        (0..v.len())
            .map(|k| -2.0 * self.curvature[k] * self.weights[k] * (2.0 * v[k]).exp())
            .collect()
    }

    fn apply_linear(&self, c: &[f64], dir: &[f64]) -> Vec<f64> {
        let lap = self.spectral.laplacian(dir);
        (0..dir.len()).map(|k| -lap[k] + c[k] * dir[k]).collect()
    }

    /// Constant guess balancing ∫Kωe^{2v} against 2πχ.
    pub fn default_guess(&self) -> Result<Field> {
        let c = if self.forcing.is_some() {
            0.0
        } else if self.chi() >= 0.0 {
            return Err(CmlError::InfeasibleTopology { chi: self.chi() });
        } else {
            let m: f64 = self
                .curvature
                .iter()
                .zip(&self.weights)
                .map(|(k, w)| -k * w)
                .sum::<f64>()
                / self.weights.len() as f64;
            0.5 * (2.0 * PI * self.split.beta_sum().abs() / m).ln()
        };
        Field::constant(self.n, Chart::Torus, c)
    }

    /// Sup-norm level below which the residual is dominated by rounding in
    /// the spectral Laplacian.
    pub fn residual_floor(&self, v: &[f64]) -> f64 {
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let nonlinear = (0..v.len())
            .map(|k| (self.curvature[k] * self.weights[k] * (2.0 * v[k]).exp()).abs())
            .fold(0.0, f64::max);
        let forcing = self.forcing.as_ref().map_or(0.0, |f| sup(f));
        let scale = self.spectral.max_eigenvalue() * vmax
            + nonlinear
            + 2.0 * PI * self.split.beta_sum().abs()
            + forcing;
        8.0 * f64::EPSILON * scale
    }

    pub fn solve(&self, v0: &Field, opts: &SolverOptions) -> Result<Solution> {
        if !(opts.tol > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        if v0.n() != self.n || v0.chart() != Chart::Torus {
            return Err(invalid("initial guess must share the problem grid"));
        }
        if self.forcing.is_none() && self.chi() >= 0.0 {
            return Err(CmlError::InfeasibleTopology { chi: self.chi() });
        }
        let mut v = v0.values().to_vec();
        let mut f = self.residual(&v)?;
        let mut cg_total = 0;
        for it in 0..=opts.max_newton {
            let floor = self.residual_floor(&v);
            let fmax = sup(&f);
            if fmax <= opts.tol.max(floor) {
                return self.finish(v, &f, floor, it, cg_total);
            }
            if it == opts.max_newton {
                return Err(CmlError::NonConvergence {
                    iterations: it,
                    residual: fmax,
                    floor,
                });
            }
            let coeff = self.linear_coefficient(&v);
            let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
            let (step, iters) = self.pcg(&coeff, &rhs, opts)?;
            cg_total += iters;
            let f_norm = norm2(&f);
            let mut s = 1.0;
            loop {
                let trial: Vec<f64> = v.iter().zip(&step).map(|(a, b)| a + s * b).collect();
                if let Ok(ft) = self.residual(&trial) {
                    if norm2(&ft) <= (1.0 - 1e-4 * s) * f_norm {
                        v = trial;
                        f = ft;
                        break;
                    }
                }
                s *= 0.5;
                if s < 2f64.powi(-30) {
                    // Rounding noise can block descent right at the floor.
                    if fmax <= opts.tol.max(4.0 * floor) {
                        return self.finish(v, &f, floor, it, cg_total);
                    }
                    return Err(CmlError::NonConvergence {
                        iterations: it,
                        residual: fmax,
                        floor,
                    });
                }
            }
        }
        unreachable!("loop returns on its last iteration")
    }

    fn pcg(&self, coeff: &[f64], b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, usize)> {
        let shift = coeff.iter().sum::<f64>() / coeff.len() as f64;
        let precondition = |r: &[f64]| self.spectral.solve_shifted(r, shift);
        let mut x = vec![0.0; b.len()];
        let mut r = b.to_vec();
        let mut z = precondition(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let target = opts.cg_rel_tol * norm2(b);
        for it in 0..opts.max_cg {
            if norm2(&r) <= target {
                return Ok((x, it));
            }
            let ap = self.apply_linear(coeff, &p);
            let curv = dot(&p, &ap);
            if !(curv > 0.0) {
                CURVATURE_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
                return Err(CmlError::IndefiniteJacobian);
            }
            let alpha = rz / curv;
            for k in 0..x.len() {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            z = precondition(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..p.len() {
                p[k] = z[k] + beta * p[k];
            }
        }
        // An inexact step is still a descent direction; the line search decides.
        Ok((x, opts.max_cg))
    }

    fn finish(
        &self,
        v: Vec<f64>,
        f: &[f64],
        floor: f64,
        iterations: usize,
        cg: usize,
    ) -> Result<Solution> {
        let h2 = 1.0 / (self.n * self.n) as f64;
        let density: Vec<f64> = v
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * (2.0 * v).exp())
            .collect();
        let area = h2 * density.iter().sum::<f64>();
        let total_curvature = h2
            * density
                .iter()
                .zip(&self.curvature)
                .map(|(d, k)| d * k)
                .sum::<f64>();
        let gb_defect = (total_curvature - 2.0 * PI * self.chi()).abs();
        Ok(Solution {
            v: Field::new(self.n, Chart::Torus, v)?,
            split: self.split.clone(),
            curvature: self.curvature.clone(),
            density,
            residual_norm: sup(f),
            residual_floor: floor,
            area,
            gb_defect,
            iterations,
            cg_iterations: cg,
        })
    }
}

fn sup(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// ω_j = (1/h²) ∫_{cell j} e^{2S}. Cells near an atom are integrated in polar
/// coordinates about it; elsewhere the point value is used.
fn cell_weights(split: &SingularSplit) -> Result<Vec<f64>> {
    let n = split.n();
    let h = 1.0 / n as f64;
    let mut w: Vec<f64> = split
        .field()
        .values()
        .iter()
        .map(|s| (2.0 * s).exp())
        .collect();
    let atoms: Vec<(Point, f64)> = split.divisor().atoms().collect();
    // Each near cell belongs to its closest atom.
    let mut jobs = Vec::new();
    for (idx, &(p, beta)) in atoms.iter().enumerate() {
        if beta == 0.0 {
            continue;
        }
        let ci = (p.y * n as f64).round() as i64;
        let cj = (p.x * n as f64).round() as i64;
        for di in -NEAR_CELLS - 1..=NEAR_CELLS + 1 {
            for dj in -NEAR_CELLS - 1..=NEAR_CELLS + 1 {
                let i = (ci + di).rem_euclid(n as i64) as usize;
                let j = (cj + dj).rem_euclid(n as i64) as usize;
                let x = Point::new(j as f64 * h, i as f64 * h);
                let d = (x - p).wrap_torus();
                if !is_near(d, h) {
                    continue;
                }
                let closest = atoms
                    .iter()
                    .enumerate()
                    .filter(|(_, (_, b))| *b != 0.0)
                    .min_by(|a, b| {
                        let da = (x - a.1 .0).wrap_torus().norm();
                        let db = (x - b.1 .0).wrap_torus().norm();
                        da.total_cmp(&db)
                    })
                    .map(|(k, _)| k);
                if closest == Some(idx) {
                    jobs.push((i * n + j, idx, p + d));
                }
            }
        }
    }
    jobs.sort_by_key(|j| j.0);
    jobs.dedup_by_key(|j| j.0);
    let values: Vec<(usize, Result<f64>)> = crate::parallel::install(|| {
        jobs.par_iter()
            .map(|&(k, idx, center)| (k, cell_weight(split, idx, atoms[idx], center, h)))
            .collect()
    });
    for (k, v) in values {
        w[k] = v?;
    }
    Ok(w)
}

fn cell_weight(
    split: &SingularSplit,
    idx: usize,
    atom: (Point, f64),
    center: Point,
    h: f64,
) -> Result<f64> {
    let (p, beta) = atom;
    let q = 2.0 * beta + 2.0;
    let mut failure = None;
    let radial = |theta: f64, rho: f64| -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        let e = Point::new(theta.cos(), theta.sin());
        let g = |r: f64| (2.0 * split.regular_near(idx, p + e * r)).exp();
        // ∫_0^ρ r^{q-1} g(r) dr. For q < 1 substitute r = ρ s^{1/q}, which
        // gives (ρ^q/q) ∫_0^1 g(ρ s^{1/q}) ds; otherwise r^{q-1} is bounded
        // and r = ρs suffices.
        let inner = if q < 1.0 {
            quad::integrate(|s| g(rho * s.powf(1.0 / q)), 0.0, 1.0, 0.0, 1e-10)
                .map(|v| rho.powf(q) / q * v)
        } else {
            quad::integrate(|s| s.powf(q - 1.0) * g(rho * s), 0.0, 1.0, 0.0, 1e-10)
                .map(|v| rho.powf(q) * v)
        };
        match inner {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        }
    };
    let total = quad::cell_polar_integral(p, center, h, radial, 1e-9);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(total? / (h * h))
}

/// F(v) for a problem assembled on the spot.
pub fn residual(v: &Field, spec: &CurvatureSpec, split: &SingularSplit) -> Result<Field> {
    if v.n() != split.n() {
        return Err(invalid("v and the singular split use different grids"));
    }
    let problem = Problem::new(spec.clone(), split.clone())?;
    Field::new(v.n(), Chart::Torus, problem.residual(v.values())?)
}

pub fn newton_solve(
    spec: &CurvatureSpec,
    split: &SingularSplit,
    v0: Option<&Field>,
    tol: f64,
) -> Result<Solution> {
    let problem = Problem::new(spec.clone(), split.clone())?;
    let guess = match v0 {
        Some(v) => v.clone(),
        None => problem.default_guess()?,
    };
    problem.solve(
        &guess,
        &SolverOptions {
            tol,
            ..Default::default()
        },
    )
}

/// A converged solve. Immutable once built.
#[derive(Debug, Clone)]
pub struct Solution {
    pub v: Field,
    pub split: SingularSplit,
    curvature: Vec<f64>,
    /// ω_j e^{2v_j}: area per unit cell measure.
    density: Vec<f64>,
    pub residual_norm: f64,
    pub residual_floor: f64,
    pub area: f64,
    pub gb_defect: f64,
    pub iterations: usize,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub n: usize,
    pub residual_norm: f64,
    pub residual_floor: f64,
    pub area: f64,
    pub gb_defect: f64,
    pub chi: f64,
    pub iterations: usize,
    pub cg_iterations: usize,
}

impl Solution {
    pub fn n(&self) -> usize {
        self.v.n()
    }

    pub fn chi(&self) -> f64 {
        euler_characteristic(Surface::Torus, self.split.divisor())
    }

    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            n: self.n(),
            residual_norm: self.residual_norm,
            residual_floor: self.residual_floor,
            area: self.area,
            gb_defect: self.gb_defect,
            chi: self.chi(),
            iterations: self.iterations,
            cg_iterations: self.cg_iterations,
        }
    }

    /// Per-node area h²ωe^{2v}.
    pub fn node_areas(&self) -> Vec<f64> {
        let h2 = 1.0 / (self.n() * self.n()) as f64;
        self.density.iter().map(|d| d * h2).collect()
    }

    /// Per-node curvature mass h²|K|ωe^{2v}.
    pub fn node_curvature_mass(&self) -> Vec<f64> {
        let h2 = 1.0 / (self.n() * self.n()) as f64;
        self.density
            .iter()
            .zip(&self.curvature)
            .map(|(d, k)| d * k.abs() * h2)
            .collect()
    }

    /// u = S + v as a pointwise field (S analytic, v bilinear).
    pub fn conformal_factor(&self) -> ConformalFactor<'_> {
        ConformalFactor { sol: self }
    }

    /// Area from an independent quadrature of the interpolated solution: a
    /// smooth partition isolates each atom, the far part is summed on the
    /// grid, and each atom's disk is integrated in polar coordinates with
    /// r^{2β} handled exactly.
    pub fn reference_area(&self) -> Result<f64> {
        const RHO: f64 = 0.08;
        let n = self.n();
        let h = 1.0 / n as f64;
        let atoms: Vec<(Point, f64)> = self.split.divisor().atoms().collect();
        let blend = |x: Point| -> f64 {
            atoms
                .iter()
                .map(|(p, _)| partition((x - *p).wrap_torus().norm(), RHO))
                .sum()
        };
        let mut far = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = Point::new(j as f64 * h, i as f64 * h);
                let w = 1.0 - blend(x);
                if w > 0.0 {
                    let u = self.split.value(x) + self.v.get(i, j);
                    far += w * (2.0 * u).exp() * h * h;
                }
            }
        }
        let (sn, sw) = quad::gauss_legendre(48);
        let m_theta = 128;
        let mut near = 0.0;
        for (idx, &(p, beta)) in atoms.iter().enumerate() {
            let q = 2.0 * beta + 2.0;
            let mut acc = 0.0;
            for t in 0..m_theta {
                let theta = 2.0 * PI * t as f64 / m_theta as f64;
                let e = Point::new(theta.cos(), theta.sin());
                for (s, w) in sn.iter().zip(&sw) {
                    let s = 0.5 * (s + 1.0);
                    let r = RHO * s.powf(1.0 / q);
                    let x = p + e * r;
                    let v = self.v.interpolate(x)?;
                    acc += 0.5
                        * w
                        * partition(r, RHO)
                        * (2.0 * (self.split.regular_near(idx, x) + v)).exp();
                }
            }
            near += RHO.powf(q) / q * acc * 2.0 * PI / m_theta as f64;
        }
        Ok(far + near)
    }
}

/// Smooth step: 1 for r ≤ ρ/4, 0 for r ≥ ρ.
fn partition(r: f64, rho: f64) -> f64 {
    let (a, b) = (0.25 * rho, rho);
    if r <= a {
        return 1.0;
    }
    if r >= b {
        return 0.0;
    }
    let t = (r - a) / (b - a);
    let f = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() };
    f(1.0 - t) / (f(1.0 - t) + f(t))
}

/// u = S + v evaluated pointwise.
pub struct ConformalFactor<'a> {
    sol: &'a Solution,
}

impl ScalarField for ConformalFactor<'_> {
    fn value(&self, x: Point) -> f64 {
        self.sol.split.value(x) + self.sol.v.interpolate(x).unwrap_or(f64::NAN)
    }
    fn radial_step(&self, _r: f64) -> f64 {
        self.sol.v.spacing()
    }
}

/// ∫_δ^{r0} e^{u(p + s·dir)} ds, integrated in log s so that power and
/// log-power singularities at p stay smooth.
pub fn radial_length<F: ScalarField + ?Sized>(
    u: &F,
    p: Point,
    dir: Point,
    delta: f64,
    r0: f64,
) -> Result<f64> {
    if !(0.0 < delta && delta < r0) {
        return Err(invalid("radial length needs 0 < delta < r0"));
    }
    let dn = dir.norm();
    if !(dn > 0.0) {
        return Err(invalid("direction must be non-zero"));
    }
    let e = dir * (1.0 / dn);
    for k in 0..=64 {
        let s = delta * (r0 / delta).powf(k as f64 / 64.0);
        let x = p + e * s;
        if !u.contains(x) {
            return Err(CmlError::OutsideChart { x: x.x, y: x.y });
        }
    }
    quad::integrate(
        |t| (u.value(p + e * t.exp()) + t).exp(),
        delta.ln(),
        r0.ln(),
        0.0,
        1e-13,
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub trials: usize,
    pub max_pairwise_diff: f64,
    pub iterations: Vec<usize>,
}

/// Solves from `trials` random smooth starts (amplitude ≤ 2 around the
/// default guess) and reports the largest pairwise sup-distance.
pub fn uniqueness_probe(
    problem: &Problem,
    trials: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<UniquenessReport> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = problem.default_guess()?;
    let n = problem.n();
    let mut sols: Vec<Field> = Vec::new();
    let mut iterations = Vec::new();
    for _ in 0..trials {
        let modes: Vec<(f64, f64, f64, f64)> = (0..6)
            .map(|_| {
                (
                    rng.gen_range(-3i32..=3) as f64,
                    rng.gen_range(-3i32..=3) as f64,
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.0..2.0 * PI),
                )
            })
            .collect();
        let raw = Field::from_fn(n, Chart::Torus, |x| {
            modes
                .iter()
                .map(|(a, b, c, ph)| c * (2.0 * PI * (a * x.x + b * x.y) + ph).cos())
                .sum()
        })?;
        let amp = rng.gen_range(0.5..2.0) / raw.max_abs().max(1e-12);
        let v0 = base.zip_with(&raw, |b, r| b + amp * r)?;
        let sol = problem.solve(&v0, opts)?;
        iterations.push(sol.iterations);
        sols.push(sol.v);
    }
    let mut worst: f64 = 0.0;
    for a in 0..sols.len() {
        for b in a + 1..sols.len() {
            let d = sols[a]
                .values()
                .iter()
                .zip(sols[b].values())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            worst = worst.max(d);
        }
    }
    Ok(UniquenessReport {
        trials,
        max_pairwise_diff: worst,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FnField;
    use crate::green::singular_part;
    use crate::measure::Divisor;

    #[test]
    fn constant_field_residual() {
        let split = singular_part(&Divisor::empty(), 16).unwrap();
        let spec = CurvatureSpec::constant(-1.0).unwrap();
        let v = Field::constant(16, Chart::Torus, 0.3).unwrap();
        let f = residual(&v, &spec, &split).unwrap();
        for r in f.values() {
            assert!((r - 0.6f64.exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn empty_divisor_is_infeasible() {
        let split = singular_part(&Divisor::empty(), 16).unwrap();
        let spec = CurvatureSpec::constant(-1.0).unwrap();
        let err = newton_solve(&spec, &split, None, 1e-10).unwrap_err();
        assert!(matches!(err, CmlError::InfeasibleTopology { .. }));
    }

    #[test]
    fn positive_curvature_rejected() {
        assert!(CurvatureSpec::constant(0.5).is_err());
        let k = Field::constant(8, Chart::Torus, -1.0).unwrap();
        assert!(CurvatureSpec::grid(k)
            .unwrap()
            .with_bounds(-2.0, 0.0)
            .is_err());
    }

    #[test]
    fn radial_length_closed_forms() {
        let flat = FnField::new(|_p: Point| 0.0);
        let l = radial_length(&flat, Point::ORIGIN, Point::new(1.0, 0.0), 0.01, 0.25).unwrap();
        assert!((l - 0.24).abs() < 1e-12);
        let beta = -0.6;
        let cone = FnField::new(move |p: Point| beta * p.norm().ln());
        let l = radial_length(&cone, Point::ORIGIN, Point::new(0.0, 1.0), 1e-4, 0.25).unwrap();
        let exact = (0.25f64.powf(beta + 1.0) - 1e-4f64.powf(beta + 1.0)) / (beta + 1.0);
        assert!((l - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn cell_weights_reduce_to_exponential_far_from_atoms() {
        let div = Divisor::new(vec![Point::new(0.5, 0.5)], vec![-0.5]).unwrap();
        let split = singular_part(&div, 64).unwrap();
        let problem = Problem::new(CurvatureSpec::constant(-1.0).unwrap(), split.clone()).unwrap();
        let k = 3 * 64 + 5;
        assert_eq!(
            problem.weights()[k],
            (2.0 * split.field().values()[k]).exp()
        );
        // The atom's own cell: integrable singularity gives a finite weight.
        let centre = 32 * 64 + 32;
        assert!(problem.weights()[centre].is_finite() && problem.weights()[centre] > 1.0);
    }
}
