//! Checkers for the concentration-compactness statements on synthetic families.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::area::{
    annulus_area, cylinder_area, cylinder_flux, disk_area, disk_mean, gradient_l1, plane_area,
};
use super::blowup::{classify_pair, BlowupSeq, PairClass, TrendTolerances};
use super::family::{Generator, SignClass, SyntheticFamily};
use crate::error::{invalid, Result};
use crate::field::{Rescaled, ScalarField};
use crate::measure::{residue, residue_at_infinity, Residue, ResidueOptions};
use crate::point::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxSign {
    /// ∫ ∂v/∂t < −2πκ throughout.
    Decreasing,
    /// ∫ ∂v/∂t > 2πκ throughout.
    Increasing,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeCircleReport {
    pub kappa: f64,
    pub length: f64,
    /// Start of Q₁ on the cylinder.
    pub offset: f64,
    pub flux_min: f64,
    pub flux_max: f64,
    pub hypothesis: FluxSign,
    pub area_q1: f64,
    pub area_q2: f64,
    /// e^{−κL/2}
    pub bound: f64,
    /// Decay (or growth) inequality in the direction of the flux; `None`
    /// when the flux hypothesis fails.
    pub inequality_holds: Option<bool>,
    /// Closed-form areas of Q₁, Q₂ for the linear model.
    pub closed_form: Option<[f64; 2]>,
}

impl ThreeCircleReport {
    pub fn hypothesis_violated(&self) -> bool {
        self.hypothesis == FluxSign::Violated
    }

    /// Largest relative deviation of the quadrature from the closed form.
    pub fn closed_form_error(&self) -> Option<f64> {
        self.closed_form.map(|[a, b]| {
            ((self.area_q1 - a) / a)
                .abs()
                .max(((self.area_q2 - b) / b).abs())
        })
    }
}

/// Samples the flux hypothesis on S¹ × [offset − L, offset + 4L − 1] and compares
/// the areas of Q_i = S¹ × [offset + (i−1)L, offset + iL].
pub fn three_circle_check(
    fam: &SyntheticFamily,
    k: u32,
    kappa: f64,
    length: f64,
    offset: f64,
) -> Result<ThreeCircleReport> {
    if !(kappa > 0.0 && length > 1.0) {
        return Err(invalid("need κ > 0 and L > 1"));
    }
    let v = fam.cylinder(k)?;
    if !matches!(fam.generator, Generator::LinearCylinder { .. }) {
        // The planar chart D_R(0) covers t ≥ −log R.
        let t_min = -fam.chart_radius().ln();
        if offset - length < t_min {
            return Err(invalid(format!(
                "cylinder window starts at t = {} before the chart edge {t_min}",
                offset - length
            )));
        }
    }
    let samples = 256;
    let (t0, t1) = (offset - length, offset + 4.0 * length - 1.0);
    let fluxes: Vec<f64> = (0..=samples)
        .map(|j| cylinder_flux(v.as_ref(), t0 + (t1 - t0) * j as f64 / samples as f64))
        .collect();
    let flux_min = fluxes.iter().cloned().fold(f64::INFINITY, f64::min);
    let flux_max = fluxes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let hypothesis = if flux_max < -2.0 * PI * kappa {
        FluxSign::Decreasing
    } else if flux_min > 2.0 * PI * kappa {
        FluxSign::Increasing
    } else {
        FluxSign::Violated
    };
    let area_q1 = cylinder_area(v.as_ref(), offset, offset + length)?;
    let area_q2 = cylinder_area(v.as_ref(), offset + length, offset + 2.0 * length)?;
    let bound = (-kappa * length / 2.0).exp();
    let inequality_holds = match hypothesis {
        FluxSign::Decreasing => Some(area_q2 < bound * area_q1),
        FluxSign::Increasing => Some(area_q1 < bound * area_q2),
        FluxSign::Violated => None,
    };
    let closed_form = match fam.generator {
        Generator::LinearCylinder { a, b } => {
            let q = |i: f64| {
                if b == 0.0 {
                    2.0 * PI * length * (2.0 * a).exp()
                } else {
                    (PI / b)
                        * (2.0 * a + 2.0 * b * (offset + (i - 1.0) * length)).exp()
                        * ((2.0 * b * length).exp() - 1.0)
                }
            };
            Some([q(1.0), q(2.0)])
        }
        _ => None,
    };
    Ok(ThreeCircleReport {
        kappa,
        length,
        offset,
        flux_min,
        flux_max,
        hypothesis,
        area_q1,
        area_q2,
        bound,
        inequality_holds,
        closed_form,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusArea {
    pub inner: f64,
    pub outer: f64,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckProfile {
    pub center: Point,
    pub r_in: f64,
    pub r_out: f64,
    /// D_r \ D_{r/e} for r = r_out e^{−j}; the innermost one is cut at r_in.
    pub annuli: Vec<AnnulusArea>,
    pub sup: f64,
    pub total: f64,
}

pub fn neck_area_profile<F: ScalarField + ?Sized>(
    u: &F,
    center: Point,
    r_in: f64,
    r_out: f64,
) -> Result<NeckProfile> {
    if !(r_in > 0.0 && r_in < r_out) {
        return Err(invalid("neck needs 0 < r_in < r_out"));
    }
    let mut annuli = Vec::new();
    let mut outer = r_out;
    while outer > r_in * (1.0 + 1e-12) {
        let inner = (outer / std::f64::consts::E).max(r_in);
        annuli.push(AnnulusArea {
            inner,
            outer,
            area: annulus_area(u, center, inner, outer)?,
        });
        outer = inner;
    }
    let sup = annuli.iter().map(|a| a.area).fold(0.0, f64::max);
    let total = annulus_area(u, center, r_in, r_out)?;
    Ok(NeckProfile {
        center,
        r_in,
        r_out,
        annuli,
        sup,
        total,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeckCurvature {
    /// −2π(2 + Res(outer, x0) + Res(bubble, ∞))
    pub value: f64,
    pub outer: Residue,
    pub bubble: Residue,
}

/// Curvature carried by the neck between a base field and a bubble on top of it.
pub fn neck_curvature_limit<A, B>(
    outer: &A,
    bubble: &B,
    x0: Point,
    opts: ResidueOptions,
) -> Result<NeckCurvature>
where
    A: ScalarField + ?Sized,
    B: ScalarField,
{
    let outer_res = residue(outer, x0, opts)?;
    let bubble_res = residue_at_infinity(bubble, Point::ORIGIN, opts)?;
    Ok(NeckCurvature {
        value: -2.0 * PI * (2.0 + outer_res.value + bubble_res.value),
        outer: outer_res,
        bubble: bubble_res,
    })
}

/// Stand-ins for the mass and gradient bounds of the structural hypotheses.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HypothesisThresholds {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for HypothesisThresholds {
    fn default() -> Self {
        HypothesisThresholds {
            lambda1: 100.0,
            lambda2: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub sign_class: SignClass,
    pub sign_ok: bool,
    /// max_k |K|(D) + Area(D)
    pub mass_max: f64,
    pub mass_ok: bool,
    /// max over sampled disks of r^{-1}‖∇u_k‖_{L¹(D_r(x))}
    pub gradient_max: f64,
    pub gradient_ok: bool,
}

impl HypothesisReport {
    pub fn holds(&self) -> bool {
        self.sign_ok && self.mass_ok && self.gradient_ok
    }
}

pub fn validate_hypotheses(
    fam: &SyntheticFamily,
    ks: &[u32],
    th: HypothesisThresholds,
) -> Result<HypothesisReport> {
    let radius = fam.chart_radius();
    let edge = radius * (1.0 - 1e-9);
    let mut mass_max: f64 = 0.0;
    let mut gradient_max: f64 = 0.0;
    for &k in ks {
        let u = fam.member(k)?;
        let f = fam.curvature(k, Point::ORIGIN).abs();
        let area = disk_area(&u, Point::ORIGIN, edge)?;
        mass_max = mass_max.max((1.0 + f) * area + fam.atom_mass(k).abs());
        for scale in [0.5, 0.25, 0.125] {
            let r = scale * radius;
            let offsets = [
                Point::ORIGIN,
                Point::new(r, 0.0),
                Point::new(0.0, -r),
                Point::new(-0.5 * r, 0.5 * r),
            ];
            for c in offsets {
                if c.norm() + r <= edge {
                    gradient_max = gradient_max.max(gradient_l1(&u, c, r));
                }
            }
        }
    }
    Ok(HypothesisReport {
        sign_class: fam.sign_class(),
        sign_ok: fam.sign_class() != SignClass::Violating,
        mass_max,
        mass_ok: mass_max <= th.lambda1,
        gradient_max,
        gradient_ok: gradient_max <= th.lambda2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub value: f64,
    pub error: f64,
}

/// Least-squares fit of the last four samples to d∞ + c·rate_k. The error bar
/// combines the shift against the fit ending one sample earlier with the
/// fit residual.
pub fn extrapolate_tail(values: &[f64], rates: &[f64]) -> Result<TailFit> {
    if values.len() != rates.len() || values.len() < 4 {
        return Err(invalid("tail extrapolation needs at least four samples"));
    }
    let fit = |end: usize| -> (f64, f64) {
        let (y, x) = (&values[end - 4..end], &rates[end - 4..end]);
        let mx = x.iter().sum::<f64>() / 4.0;
        let my = y.iter().sum::<f64>() / 4.0;
        let sxx: f64 = x.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = if sxx > 1e-300 {
            x.iter()
                .zip(y)
                .map(|(x, y)| (x - mx) * (y - my))
                .sum::<f64>()
                / sxx
        } else {
            0.0
        };
        let d = my - slope * mx;
        let res = x
            .iter()
            .zip(y)
            .map(|(x, y)| (y - d - slope * x).abs())
            .fold(0.0, f64::max);
        (d, res)
    };
    let n = values.len();
    let (value, res) = fit(n);
    let shift = if n >= 5 {
        (fit(n - 1).0 - value).abs()
    } else {
        0.0
    };
    Ok(TailFit {
        value,
        error: shift + res,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaIdentityReport {
    pub window: f64,
    pub ks: Vec<u32>,
    /// Area(D_window, g_k)
    pub areas: Vec<f64>,
    /// Mean c_k of u_k on the window.
    pub means: Vec<f64>,
    pub limit_area: f64,
    pub bubble_areas: Vec<f64>,
    /// Area(D, g_k) − Area(D, g_∞) − Σ bubble areas.
    pub defects: Vec<f64>,
    pub extrapolated: TailFit,
    /// |extrapolated defect|
    pub defect: f64,
    pub ghost: bool,
    pub hypotheses: HypothesisReport,
    pub hypothesis_violation: bool,
}

/// Tail-extrapolated defect of the bubble-tree area identity on D_window.
pub fn area_identity_check(
    fam: &SyntheticFamily,
    bubbles: &[BlowupSeq],
    window: f64,
    ks: &[u32],
    th: HypothesisThresholds,
) -> Result<AreaIdentityReport> {
    if ks.len() < 4 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("need at least four strictly increasing indices"));
    }
    if !(window > 0.0 && window < fam.chart_radius()) {
        return Err(invalid("window must lie inside the chart"));
    }
    let hypotheses = validate_hypotheses(fam, ks, th)?;
    let mut areas = Vec::with_capacity(ks.len());
    let mut means = Vec::with_capacity(ks.len());
    for &k in ks {
        let u = fam.member(k)?;
        areas.push(disk_area(&u, Point::ORIGIN, window)?);
        means.push(disk_mean(&u, Point::ORIGIN, window)?);
    }
    let limit_area = match fam.limit()? {
        Some(u) => disk_area(&u, Point::ORIGIN, window)?,
        None => 0.0,
    };
    let model = fam.bubble(ks)?;
    let mut bubble_areas = Vec::with_capacity(bubbles.len());
    for seq in bubbles {
        bubble_areas.push(bubble_area(fam, seq, model.as_ref())?);
    }
    let total_bubbles: f64 = bubble_areas.iter().sum();
    let defects: Vec<f64> = areas
        .iter()
        .map(|a| a - limit_area - total_bubbles)
        .collect();
    let rates: Vec<f64> = ks.iter().map(|&k| fam.rate(k)).collect();
    let extrapolated = extrapolate_tail(&defects, &rates)?;
    let tail = &means[means.len() / 2..];
    let ghost = fam.mean_diverges() && tail.windows(2).all(|w| w[1] < w[0]);
    let hypothesis_violation = !hypotheses.holds();
    Ok(AreaIdentityReport {
        window,
        ks: ks.to_vec(),
        areas,
        means,
        limit_area,
        bubble_areas,
        defects,
        defect: extrapolated.value.abs(),
        extrapolated,
        ghost,
        hypotheses,
        hypothesis_violation,
    })
}

fn bubble_area(
    fam: &SyntheticFamily,
    seq: &BlowupSeq,
    model: Option<&super::family::BubbleModel>,
) -> Result<f64> {
    if let Some(m) = model {
        if classify_pair(seq, &m.sequence, TrendTolerances::default())?
            == PairClass::EssentiallySame
        {
            return match m.area {
                Some(a) => Ok(a),
                None => plane_area(&m.field, Point::ORIGIN, 1e-6),
            };
        }
    }
    // Wide-window quadrature of the last rescaled member.
    let last = seq.len() - 1;
    let k = u32::try_from(seq.index()[last])
        .map_err(|_| invalid("sequence index too large for a family member"))?;
    let rescaled = Rescaled {
        inner: fam.member(k)?,
        center: seq.centers()[last],
        scale: seq.radii()[last],
    };
    plane_area(&rescaled, Point::ORIGIN, 1e-6)
}
