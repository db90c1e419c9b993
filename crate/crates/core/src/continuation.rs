//! Cone-to-cusp continuation and the concentration scan.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CmlError, Result};
use crate::field::{Chart, Field, ScalarField};
use crate::green::singular_part;
use crate::measure::{euler_characteristic, Divisor, Surface, CONCENTRATION_THRESHOLD};
use crate::point::Point;
use crate::solver::{CurvatureSpec, Problem, Solution, SolverOptions};
use crate::spectral::Spectral;

/// Heat-smooths `k` to time 4^{-stage} and clamps into [−Λ, −1/Λ].
pub fn mollify_curvature(k: &Field, stage: u32, lambda: f64) -> Result<Field> {
    if k.chart() != Chart::Torus {
        return Err(invalid("curvature must live on the torus"));
    }
    if !(lambda >= 1.0) {
        return Err(invalid("pinching constant must be at least 1"));
    }
    let (lo, hi) = (-lambda, -1.0 / lambda);
    let slack = 1e-12 * lambda;
    if k.values().iter().any(|&v| v < lo - slack || v > hi + slack) {
        return Err(invalid(format!("curvature leaves [{lo}, {hi}]")));
    }
    let t = 4f64.powi(-(stage as i32));
    let smooth = Spectral::new(k.n(), 1.0).heat(k.values(), t);
    Field::new(
        k.n(),
        Chart::Torus,
        smooth.into_iter().map(|v| v.clamp(lo, hi)).collect(),
    )
}

/// Curvature to approach along the schedule.
#[derive(Debug, Clone)]
pub enum CurvatureTarget {
    Constant(f64),
    /// Rough target, mollified per stage.
    Grid {
        field: Field,
        lambda: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Stage {
    pub index: u32,
    pub weights: Vec<f64>,
    pub curvature: CurvatureSpec,
}

#[derive(Debug, Clone)]
pub struct ContinuationSchedule {
    target: Divisor,
    stages: Vec<Stage>,
    warm_start: bool,
}

impl ContinuationSchedule {
    pub fn new(target: Divisor, stages: Vec<Stage>, warm_start: bool) -> Result<Self> {
        if stages.is_empty() {
            return Err(invalid("schedule has no stages"));
        }
        let m = target.len();
        for (s, stage) in stages.iter().enumerate() {
            if stage.weights.len() != m {
                return Err(invalid(format!(
                    "stage {s} has {} weights for {m} atoms",
                    stage.weights.len()
                )));
            }
            for (i, (&b, &goal)) in stage.weights.iter().zip(target.weights()).enumerate() {
                if !(b > -1.0) || b < goal {
                    return Err(invalid(format!(
                        "stage {s} weight {i} = {b} outside (max(-1, target), ...)"
                    )));
                }
                if s > 0 && b > stages[s - 1].weights[i] {
                    return Err(invalid(format!("weight {i} increases at stage {s}")));
                }
            }
        }
        Ok(ContinuationSchedule {
            target,
            stages,
            warm_start,
        })
    }

    /// β^k = −1 + 2^{−k} on cusp atoms for k = 1..=count; other atoms keep
    /// their target weight throughout.
    pub fn cusp_default(target: &Divisor, curvature: &CurvatureTarget, count: u32) -> Result<Self> {
        let stages = (1..=count)
            .map(|k| {
                let weights = target
                    .weights()
                    .iter()
                    .map(|&b| {
                        if b <= -1.0 {
                            -1.0 + 2f64.powi(-(k as i32))
                        } else {
                            b
                        }
                    })
                    .collect();
                let curvature = match curvature {
                    CurvatureTarget::Constant(c) => CurvatureSpec::constant(*c)?,
                    CurvatureTarget::Grid { field, lambda } => {
                        CurvatureSpec::grid(mollify_curvature(field, k, *lambda)?)?
                            .with_bounds(-lambda, -1.0 / lambda)?
                    }
                };
                Ok(Stage {
                    index: k,
                    weights,
                    curvature,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ContinuationSchedule::new(target.clone(), stages, true)
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn target(&self) -> &Divisor {
        &self.target
    }

    pub fn with_warm_start(mut self, warm: bool) -> Self {
        self.warm_start = warm;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub k: u32,
    pub chi: f64,
    pub area: f64,
    pub gb_defect: f64,
    pub max_local_mass: f64,
    pub solve_iters: usize,
    pub residual_norm: f64,
    /// −2πχ/Λ ≤ area ≤ 2πΛ|χ| with Λ the stage pinching constant.
    pub within_area_bounds: bool,
}

#[derive(Debug, Clone)]
pub struct ContinuationRun {
    pub stages: Vec<StageReport>,
    /// Richardson extrapolation 2A_k − A_{k−1} of the last two stages.
    pub extrapolated_area: Option<f64>,
    /// Change of the extrapolant between the last two stage pairs.
    pub extrapolation_error: Option<f64>,
    pub last: Solution,
}

/// Default scan radii used for the per-stage concentration monitor.
pub const STAGE_SCAN_RADII: [f64; 2] = [0.0625, 0.125];

pub fn run_continuation(
    sched: &ContinuationSchedule,
    n: usize,
    opts: &SolverOptions,
) -> Result<ContinuationRun> {
    if euler_characteristic(Surface::Torus, &sched.target) >= 0.0 {
        return Err(CmlError::InfeasibleTopology {
            chi: euler_characteristic(Surface::Torus, &sched.target),
        });
    }
    let mut reports = Vec::new();
    let mut prev: Option<Field> = None;
    let mut last = None;
    for stage in &sched.stages {
        let fail = |e: CmlError| CmlError::StageFailure {
            stage: stage.index as usize,
            source: Box::new(e),
        };
        let div = sched
            .target
            .with_weights(stage.weights.clone())
            .map_err(fail)?;
        let split = singular_part(&div, n).map_err(fail)?;
        let problem = Problem::new(stage.curvature.clone(), split).map_err(fail)?;
        let v0 = match (&prev, sched.warm_start) {
            (Some(v), true) => v.clone(),
            _ => problem.default_guess().map_err(fail)?,
        };
        let sol = problem.solve(&v0, opts).map_err(fail)?;
        let stage_tol = 10.0 * opts.tol.max(sol.residual_floor);
        if sol.gb_defect > stage_tol {
            return Err(fail(invalid(format!(
                "Gauss-Bonnet defect {:.3e} above stage tolerance {stage_tol:.3e}",
                sol.gb_defect
            ))));
        }
        let scan = no_bubble_scan(
            &MassSample::from_solution(&sol),
            &STAGE_SCAN_RADII,
            CONCENTRATION_THRESHOLD,
        )
        .map_err(fail)?;
        let chi = sol.chi();
        let (lo, hi) = stage.curvature.bounds();
        let lambda = (-lo).max(-1.0 / hi);
        let slack = 1e-9 * sol.area;
        let lower = -2.0 * PI * chi / lambda;
        let upper = 2.0 * PI * lambda * chi.abs();
        reports.push(StageReport {
            k: stage.index,
            chi,
            area: sol.area,
            gb_defect: sol.gb_defect,
            max_local_mass: scan.max_mass(),
            solve_iters: sol.iterations,
            residual_norm: sol.residual_norm,
            within_area_bounds: sol.area >= lower - slack && sol.area <= upper + slack,
        });
        prev = Some(sol.v.clone());
        last = Some(sol);
    }
    let areas: Vec<f64> = reports.iter().map(|r| r.area).collect();
    let rich = |k: usize| 2.0 * areas[k] - areas[k - 1];
    let m = areas.len();
    let extrapolated_area = (m >= 2).then(|| rich(m - 1));
    let extrapolation_error = (m >= 3).then(|| (rich(m - 1) - rich(m - 2)).abs());
    Ok(ContinuationRun {
        stages: reports,
        extrapolated_area,
        extrapolation_error,
        last: last.expect("schedule is non-empty"),
    })
}

/// Nodal masses for the concentration scan.
#[derive(Debug, Clone)]
pub struct MassSample {
    nodes: Vec<Point>,
    curvature_mass: Vec<f64>,
    area: Vec<f64>,
    spacing: f64,
    domain: ScanDomain,
    exclusions: Vec<Point>,
}

#[derive(Debug, Clone, Copy)]
enum ScanDomain {
    Torus,
    Disk(f64),
}

impl MassSample {
    pub fn from_solution(sol: &Solution) -> Self {
        let n = sol.n();
        let h = 1.0 / n as f64;
        let nodes = (0..n * n)
            .map(|k| Point::new((k % n) as f64 * h, (k / n) as f64 * h))
            .collect();
        MassSample {
            nodes,
            curvature_mass: sol.node_curvature_mass(),
            area: sol.node_areas(),
            spacing: h,
            domain: ScanDomain::Torus,
            exclusions: sol.split.divisor().points().to_vec(),
        }
    }

    /// Rasterizes e^{2u} with constant curvature `k` on a disk chart.
    pub fn from_closed_form<F: ScalarField + ?Sized>(
        u: &F,
        k: f64,
        n: usize,
        radius: f64,
    ) -> Result<Self> {
        let grid = Field::from_fn(n, Chart::Disk { radius }, |p| u.value(p))?;
        let w = grid.node_weights();
        let mut nodes = Vec::with_capacity(n * n);
        let mut area = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                nodes.push(grid.node(i, j));
                area.push(w[i * n + j] * (2.0 * grid.get(i, j)).exp());
            }
        }
        let curvature_mass = area.iter().map(|a| a * k.abs()).collect();
        Ok(MassSample {
            nodes,
            curvature_mass,
            area,
            spacing: grid.spacing(),
            domain: ScanDomain::Disk(radius),
            exclusions: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusScan {
    pub radius: f64,
    pub max_mass: f64,
    pub max_area: f64,
    pub argmax: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub center: Point,
    pub radius: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub threshold: f64,
    pub radii: Vec<RadiusScan>,
    pub flags: Vec<Concentration>,
}

impl ScanReport {
    pub fn max_mass(&self) -> f64 {
        self.radii.iter().map(|r| r.max_mass).fold(0.0, f64::max)
    }
}

/// Curvature mass and area of disks centred on a lattice of spacing r/2,
/// skipping disks that come within four cells of an atom.
pub fn no_bubble_scan(sample: &MassSample, radii: &[f64], threshold: f64) -> Result<ScanReport> {
    if !(threshold > 0.0) {
        return Err(invalid("threshold must be positive"));
    }
    let mut out = ScanReport {
        threshold,
        radii: Vec::new(),
        flags: Vec::new(),
    };
    for &r in radii {
        if !(r > 0.0) {
            return Err(invalid("scan radii must be positive"));
        }
        let step = 0.5 * r;
        let centers: Vec<Point> = match sample.domain {
            ScanDomain::Torus => {
                let m = (1.0 / step).ceil() as usize;
                (0..m * m)
                    .map(|k| Point::new((k % m) as f64 * step, (k / m) as f64 * step))
                    .collect()
            }
            ScanDomain::Disk(radius) => {
                let m = (radius / step).floor() as i64;
                let mut c = Vec::new();
                for a in -m..=m {
                    for b in -m..=m {
                        let p = Point::new(a as f64 * step, b as f64 * step);
                        if p.norm() + r <= radius {
                            c.push(p);
                        }
                    }
                }
                c
            }
        };
        let guard = r + 4.0 * sample.spacing;
        let results: Vec<(Point, f64, f64)> = crate::parallel::install(|| {
            centers
                .par_iter()
                .filter(|c| {
                    sample
                        .exclusions
                        .iter()
                        .all(|p| distance(sample.domain, **c, *p) > guard)
                })
                .map(|&c| {
                    let (m, a) = disk_sums(sample, c, r);
                    (c, m, a)
                })
                .collect()
        });
        let mut scan = RadiusScan {
            radius: r,
            max_mass: 0.0,
            max_area: 0.0,
            argmax: Point::ORIGIN,
        };
        for &(c, m, a) in &results {
            if m > scan.max_mass {
                scan.max_mass = m;
                scan.argmax = c;
            }
            scan.max_area = scan.max_area.max(a);
            if m >= threshold {
                out.flags.push(Concentration {
                    center: c,
                    radius: r,
                    mass: m,
                });
            }
        }
        out.radii.push(scan);
    }
    Ok(out)
}

fn distance(domain: ScanDomain, a: Point, b: Point) -> f64 {
    match domain {
        ScanDomain::Torus => (a - b).wrap_torus().norm(),
        ScanDomain::Disk(_) => (a - b).norm(),
    }
}

fn disk_sums(sample: &MassSample, c: Point, r: f64) -> (f64, f64) {
    let n = (sample.nodes.len() as f64).sqrt() as usize;
    let h = sample.spacing;
    let origin = sample.nodes[0];
    let span = (r / h).ceil() as i64 + 1;
    let ci = ((c.y - origin.y) / h).round() as i64;
    let cj = ((c.x - origin.x) / h).round() as i64;
    let (mut mass, mut area) = (0.0, 0.0);
    for di in -span..=span {
        for dj in -span..=span {
            let (i, j) = (ci + di, cj + dj);
            let (i, j) = match sample.domain {
                ScanDomain::Torus => (i.rem_euclid(n as i64), j.rem_euclid(n as i64)),
                ScanDomain::Disk(_) => {
                    if i < 0 || j < 0 || i >= n as i64 || j >= n as i64 {
                        continue;
                    }
                    (i, j)
                }
            };
            let k = i as usize * n + j as usize;
            if distance(sample.domain, sample.nodes[k], c) <= r {
                mass += sample.curvature_mass[k];
                area += sample.area[k];
            }
        }
    }
    (mass, area)
}
