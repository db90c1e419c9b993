//! Closed-form model families u_k used to exercise the bubble-tree checks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::area::CylinderField;
use super::blowup::BlowupSeq;
use crate::error::{invalid, Result};
use crate::field::{FnField, ScalarField};
use crate::point::Point;

/// Sign of the smooth curvature part, as in the first structural hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignClass {
    /// f_k ≥ 1
    Positive,
    /// f_k ≤ −1
    Negative,
    /// Neither bound holds (e.g. flat pieces).
    Violating,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn minus_one() -> f64 {
    -1.0
}
fn quarter() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Generator {
    /// log(2λ_k/(λ_k² + |x − q|²)) with λ_k = lambda0·2^{−k}; K ≡ 1.
    SphericalCap {
        #[serde(default = "one")]
        lambda0: f64,
        #[serde(default)]
        center: Point,
    },
    /// Hyperbolic disk of the given radius plus 2^{−k}·shift; K ≡ −1.
    SmoothConvergent {
        #[serde(default = "two")]
        radius: f64,
        #[serde(default = "minus_one")]
        shift: f64,
    },
    /// −log(k r) on r_k < r < outer with log(outer/r_k) = k², constant
    /// beyond: a flat cylinder of circumference 2π/k and length k.
    FlatNeck {
        #[serde(default = "quarter")]
        outer: f64,
    },
    /// v = a + b t on S¹ × ℝ, equivalently a − (b + 1) log r in the plane.
    LinearCylinder {
        a: f64,
        b: f64,
    },
    /// −log(r log(1/r)) on D_{1/2}; K ≡ −1.
    HyperbolicCusp {},
    /// −log r, the flat half-infinite cylinder.
    FlatCylinderEnd {},
    /// β log r, the flat cone.
    Cone {
        beta: f64,
    },
    Zero {},
}

type Member = Box<dyn ScalarField>;

/// Declared limit of a blowup at the family's concentration point.
pub struct BubbleModel {
    pub sequence: BlowupSeq,
    pub field: Member,
    pub area: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFamily {
    pub generator: Generator,
}

impl SyntheticFamily {
    pub fn new(generator: Generator) -> Result<Self> {
        let ok = match generator {
            Generator::SphericalCap { lambda0, center } => lambda0 > 0.0 && center.norm() < 0.5,
            Generator::SmoothConvergent { radius, shift } => radius > 1.0 && shift.is_finite(),
            Generator::FlatNeck { outer } => outer > 0.0 && outer < 1.0,
            Generator::LinearCylinder { a, b } => a.is_finite() && b.is_finite(),
            Generator::Cone { beta } => beta > -1.0,
            Generator::HyperbolicCusp {} | Generator::FlatCylinderEnd {} | Generator::Zero {} => {
                true
            }
        };
        if !ok {
            return Err(invalid(format!(
                "parameters out of range for {generator:?}"
            )));
        }
        Ok(SyntheticFamily { generator })
    }

    pub fn sign_class(&self) -> SignClass {
        match self.generator {
            Generator::SphericalCap { .. } => SignClass::Positive,
            Generator::SmoothConvergent { .. } | Generator::HyperbolicCusp {} => {
                SignClass::Negative
            }
            _ => SignClass::Violating,
        }
    }

    /// Radius of the planar chart D_R(0).
    pub fn chart_radius(&self) -> f64 {
        match self.generator {
            Generator::HyperbolicCusp {} => 0.5,
            _ => 1.0,
        }
    }

    /// Smooth curvature f_k at `p`.
    pub fn curvature(&self, _k: u32, _p: Point) -> f64 {
        match self.sign_class() {
            SignClass::Positive => 1.0,
            SignClass::Negative => -1.0,
            SignClass::Violating => 0.0,
        }
    }

    /// Mass λ_k of the curvature atom at the origin.
    pub fn atom_mass(&self, _k: u32) -> f64 {
        match self.generator {
            Generator::HyperbolicCusp {} | Generator::FlatCylinderEnd {} => 2.0 * PI,
            Generator::Cone { beta } => -2.0 * PI * beta,
            Generator::LinearCylinder { b, .. } => 2.0 * PI * (b + 1.0),
            _ => 0.0,
        }
    }

    /// Rate at which k-dependent quantities approach their limit.
    pub fn rate(&self, k: u32) -> f64 {
        let k = k as f64;
        match self.generator {
            Generator::SphericalCap { lambda0, .. } => (lambda0 * 2f64.powf(-k)).powi(2),
            Generator::SmoothConvergent { .. } => 2f64.powf(-k),
            Generator::FlatNeck { .. } => 1.0 / (k * k),
            _ => 0.0,
        }
    }

    pub fn member(&self, k: u32) -> Result<Member> {
        let r = self.chart_radius();
        let disk = |f: Box<dyn Fn(Point) -> f64 + Send + Sync>| -> Member {
            Box::new(FnField::on_disk(f, Point::ORIGIN, r))
        };
        Ok(match self.generator {
            Generator::SphericalCap { lambda0, center } => {
                let l = lambda0 * 2f64.powi(-(k as i32));
                disk(Box::new(move |p: Point| {
                    (2.0 * l / (l * l + (p - center).norm_sq())).ln()
                }))
            }
            Generator::SmoothConvergent { radius, shift } => {
                let c = shift * 2f64.powi(-(k as i32));
                disk(Box::new(move |p: Point| {
                    (2.0 * radius / (radius * radius - p.norm_sq())).ln() + c
                }))
            }
            Generator::FlatNeck { outer } => {
                if k == 0 {
                    return Err(invalid("flat neck members start at k = 1"));
                }
                let kf = k as f64;
                let inner = outer * (-kf * kf).exp();
                disk(Box::new(move |p: Point| {
                    -(kf * p.norm().clamp(inner, outer)).ln()
                }))
            }
            Generator::LinearCylinder { a, b } => {
                disk(Box::new(move |p: Point| a - (b + 1.0) * p.norm().ln()))
            }
            Generator::HyperbolicCusp {} => disk(Box::new(|p: Point| {
                let r = p.norm();
                -(r * (1.0 / r).ln()).ln()
            })),
            Generator::FlatCylinderEnd {} => disk(Box::new(|p: Point| -p.norm().ln())),
            Generator::Cone { beta } => disk(Box::new(move |p: Point| beta * p.norm().ln())),
            Generator::Zero {} => disk(Box::new(|_p: Point| 0.0)),
        })
    }

    /// Weak limit of u_k on the window, or `None` when the mean value
    /// c_k tends to −∞ and the limit metric carries no area.
    pub fn limit(&self) -> Result<Option<Member>> {
        Ok(match self.generator {
            Generator::SphericalCap { .. } | Generator::FlatNeck { .. } => None,
            Generator::SmoothConvergent { radius, .. } => {
                let f = move |p: Point| (2.0 * radius / (radius * radius - p.norm_sq())).ln();
                Some(Box::new(FnField::on_disk(
                    f,
                    Point::ORIGIN,
                    self.chart_radius(),
                )))
            }
            _ => Some(self.member(1)?),
        })
    }

    /// Declared c_k → −∞ behaviour (ghost flag).
    pub fn mean_diverges(&self) -> bool {
        self.limit().map(|l| l.is_none()).unwrap_or(false)
    }

    /// The bubble the family is built around, sampled at `ks`.
    pub fn bubble(&self, ks: &[u32]) -> Result<Option<BubbleModel>> {
        match self.generator {
            Generator::SphericalCap { lambda0, center } => {
                let idx: Vec<u64> = ks.iter().map(|&k| k as u64).collect();
                let centers = vec![center; ks.len()];
                let radii = ks
                    .iter()
                    .map(|&k| lambda0 * 2f64.powi(-(k as i32)))
                    .collect();
                Ok(Some(BubbleModel {
                    sequence: BlowupSeq::new(idx, centers, radii)?,
                    field: Box::new(FnField::new(|y: Point| (2.0 / (1.0 + y.norm_sq())).ln())),
                    area: Some(4.0 * PI),
                }))
            }
            _ => Ok(None),
        }
    }

    /// The cylinder picture around the origin (member k).
    pub fn cylinder(&self, k: u32) -> Result<Box<dyn CylinderField>> {
        Ok(match self.generator {
            Generator::LinearCylinder { a, b } => Box::new(move |_th: f64, t: f64| a + b * t),
            _ => Box::new(super::area::CylinderView {
                inner: self.member(k)?,
                center: Point::ORIGIN,
            }),
        })
    }
}
